//! Static 2D k-d tree for exact nearest-neighbour queries.
//!
//! Ties are resolved towards the lowest point index and distances are the same
//! floating-point expression as [`sq_dist`], so results agree bit for bit with
//! a linear scan.

use nalgebra::Vector2;

#[inline]
pub fn sq_dist(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// Linear-scan nearest neighbour: `(index, squared distance)`.
pub fn nearest_brute(points: &[Vector2<f64>], q: &Vector2<f64>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = sq_dist(p, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    // Implicit balanced layout over (point, original index): the median of a
    // range sits at its middle, split along axis = depth % 2. Ranges of at
    // most LEAF_SIZE entries are scanned linearly.
    nodes: Vec<(Vector2<f64>, usize)>,
}

impl KdTree {
    pub fn new(points: &[Vector2<f64>]) -> Self {
        let mut nodes: Vec<(Vector2<f64>, usize)> = points.iter().copied().zip(0..).collect();
        build(&mut nodes, 0);
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nearest point to `q` as `(index, squared distance)`; lowest index on ties.
    pub fn nearest(&self, q: &Vector2<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.nodes.len(), 0, &mut best);
        best
    }

    fn search(&self, q: &Vector2<f64>, lo: usize, hi: usize, depth: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF_SIZE {
            for (p, idx) in &self.nodes[lo..hi] {
                let d = sq_dist(p, q);
                if d < best.1 || (d == best.1 && *idx < best.0) {
                    *best = (*idx, d);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let (p, idx) = &self.nodes[mid];
        let d = sq_dist(p, q);
        if d < best.1 || (d == best.1 && *idx < best.0) {
            *best = (*idx, d);
        }
        let diff = if depth.is_multiple_of(2) { q.x - p.x } else { q.y - p.y };
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        // Points beyond the split are at least |diff| away along this axis;
        // equality must still be visited for the index tie-break.
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build(nodes: &mut [(Vector2<f64>, usize)], depth: usize) {
    if nodes.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % 2;
    let mid = nodes.len() / 2;
    nodes.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    let (left, right) = nodes.split_at_mut(mid);
    build(left, depth + 1);
    build(&mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let pts = vec![Vector2::new(1.0, 1.0), Vector2::new(0.0, 0.0), Vector2::new(0.0, 0.0), Vector2::new(0.0, 0.0)];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Vector2::new(0.1, 0.0)).0, 1);
    }

    proptest! {
        #[test]
        fn agrees_with_linear_scan(
            raw in prop::collection::vec((0i32..20, 0i32..20), 1..300),
            queries in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 1..50),
        ) {
            // integer grid coordinates make exact ties common
            let pts: Vec<_> = raw.iter().map(|&(x, y)| Vector2::new(x as f64, y as f64)).collect();
            let tree = KdTree::new(&pts);
            for (x, y) in queries {
                let q = Vector2::new(x.round(), y);
                prop_assert_eq!(tree.nearest(&q), nearest_brute(&pts, &q));
            }
        }
    }
}
