use std::collections::BTreeMap;

use nalgebra::Vector2;

use super::LossValue;
use crate::error::{Error, Result};
use crate::kdtree::{nearest_brute, sq_dist, KdTree};

/// Nearest-neighbour assignment in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChamferAssignments {
    pub a_to_b: Vec<usize>,
    pub b_to_a: Vec<usize>,
}

fn check(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer cloud".into()));
    }
    Ok(())
}

/// `mean_a min_b ‖a−b‖² + mean_b min_a ‖a−b‖²` with a linear scan.
///
/// Gradients are reported for both clouds as `cloud_a` and `cloud_b`.
pub fn chamfer(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> Result<LossValue> {
    check(a, b)?;
    let assign = ChamferAssignments {
        a_to_b: a.iter().map(|p| nearest_brute(b, p).0).collect(),
        b_to_a: b.iter().map(|p| nearest_brute(a, p).0).collect(),
    };
    Ok(from_assignments(a, b, &assign))
}

/// Same result as [`chamfer`], with nearest neighbours found through k-d trees.
pub fn chamfer_fast(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> Result<LossValue> {
    chamfer_with_assignments(a, b).map(|(v, _)| v)
}

/// [`chamfer_fast`] that also returns the nearest-neighbour assignment, which
/// identifies the smooth piece of the loss a point lies on.
pub fn chamfer_with_assignments(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> Result<(LossValue, ChamferAssignments)> {
    check(a, b)?;
    let tree_a = KdTree::new(a);
    let tree_b = KdTree::new(b);
    let assign = ChamferAssignments {
        a_to_b: a.iter().map(|p| tree_b.nearest(p).0).collect(),
        b_to_a: b.iter().map(|p| tree_a.nearest(p).0).collect(),
    };
    Ok((from_assignments(a, b, &assign), assign))
}

fn from_assignments(a: &[Vector2<f64>], b: &[Vector2<f64>], assign: &ChamferAssignments) -> LossValue {
    let inv_a = 1.0 / a.len() as f64;
    let inv_b = 1.0 / b.len() as f64;
    let mut grad_a = vec![Vector2::zeros(); a.len()];
    let mut grad_b = vec![Vector2::zeros(); b.len()];
    let mut sum_ab = 0.0;
    for (i, &j) in assign.a_to_b.iter().enumerate() {
        sum_ab += sq_dist(&a[i], &b[j]);
        let g = (a[i] - b[j]) * (2.0 * inv_a);
        grad_a[i] += g;
        grad_b[j] -= g;
    }
    let mut sum_ba = 0.0;
    for (j, &i) in assign.b_to_a.iter().enumerate() {
        sum_ba += sq_dist(&a[i], &b[j]);
        let g = (b[j] - a[i]) * (2.0 * inv_b);
        grad_b[j] += g;
        grad_a[i] -= g;
    }
    let flat = |g: Vec<Vector2<f64>>| g.iter().flat_map(|v| [v.x, v.y]).collect::<Vec<_>>();
    LossValue {
        value: sum_ab * inv_a + sum_ba * inv_b,
        gradients: BTreeMap::from([("cloud_a", flat(grad_a)), ("cloud_b", flat(grad_b))]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn worked_examples() {
        let a = [v(0.0, 0.0), v(1.0, 0.0)];
        assert_eq!(chamfer(&a, &a).unwrap().value, 0.0);
        assert_eq!(chamfer(&a, &[v(0.0, 0.0)]).unwrap().value, 0.5);
        assert_eq!(chamfer(&[v(0.0, 0.0)], &[v(3.0, 4.0)]).unwrap().value, 50.0);
        assert_eq!(chamfer_fast(&[v(0.0, 0.0)], &[v(3.0, 4.0)]).unwrap().value, 50.0);
        assert!(matches!(chamfer(&[], &a), Err(Error::Empty(_))));
        assert!(matches!(chamfer_fast(&a, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn single_points_gradient() {
        let l = chamfer(&[v(0.0, 0.0)], &[v(3.0, 4.0)]).unwrap();
        // both directions pull a towards b: 2·(a−b) twice
        assert_eq!(l.grad("cloud_a"), &[-12.0, -16.0]);
    }

    proptest! {
        #[test]
        fn symmetric_and_translation_invariant(
            a in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40),
            b in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40),
            dx in -10.0f64..10.0, dy in -10.0f64..10.0,
        ) {
            let a: Vec<_> = a.iter().map(|&(x, y)| v(x, y)).collect();
            let b: Vec<_> = b.iter().map(|&(x, y)| v(x, y)).collect();
            let ab = chamfer(&a, &b).unwrap().value;
            let ba = chamfer(&b, &a).unwrap().value;
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
            let shift = v(dx, dy);
            let a2: Vec<_> = a.iter().map(|p| p + shift).collect();
            let b2: Vec<_> = b.iter().map(|p| p + shift).collect();
            prop_assert!((chamfer(&a2, &b2).unwrap().value - ab).abs() <= 1e-9 * ab.max(1.0));
        }

        #[test]
        fn zero_iff_same_point_set(
            a in prop::collection::vec((0i32..6, 0i32..6), 1..12),
            b in prop::collection::vec((0i32..6, 0i32..6), 1..12),
        ) {
            let a: Vec<_> = a.iter().map(|&(x, y)| v(x as f64, y as f64)).collect();
            let b: Vec<_> = b.iter().map(|&(x, y)| v(x as f64, y as f64)).collect();
            let same = a.iter().all(|p| b.contains(p)) && b.iter().all(|p| a.contains(p));
            prop_assert_eq!(chamfer(&a, &b).unwrap().value == 0.0, same);
        }
    }
}
