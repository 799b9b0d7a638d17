//! Silhouette masks and 2D point clouds.
//!
//! Pixel `(col, row)` covers `[col, col+1) × [row, row+1)`; its center is at
//! `(col + 0.5, row + 0.5)`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::body::{BodyModel, Camera, PoseParams, ShapeParams};
use crate::error::{Error, Result};

pub const FULL_RESOLUTION: f64 = 224.0;
pub const MIN_DEGRADED_RESOLUTION: f64 = 48.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!("mask dimensions must be positive, got {width}x{height}")));
        }
        Ok(Self {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Foreground pixel centers in row-major order.
    pub fn foreground_centers(&self) -> Vec<Vector2<f64>> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| Vector2::new((i % self.width) as f64 + 0.5, (i / self.width) as f64 + 0.5))
            .collect()
    }

    /// Binary PGM (`P5`, 0 background / 255 foreground).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        out.write_all(&bytes)
    }

    pub fn read_pgm<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut header = Vec::new();
        // magic, width, height, maxval separated by whitespace (comments allowed)
        while header.len() < 4 {
            let mut line = String::new();
            if reader.read_line(&mut line).map_err(|e| Error::io("<pgm>", e))? == 0 {
                return Err(Error::Format("truncated PGM header".into()));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        if header[0] != "P5" {
            return Err(Error::Format(format!("expected P5 magic, found {}", header[0])));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM field {s:?}")));
        let (width, height, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        let mut mask = Mask::new(width, height)?;
        let mut data = vec![0u8; width * height];
        reader
            .read_exact(&mut data)
            .map_err(|_| Error::Format("truncated PGM raster".into()))?;
        for (bit, byte) in mask.bits.iter_mut().zip(data) {
            *bit = byte != 0;
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudSource {
    Silhouette,
    Vertices,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud2D {
    pub points: Vec<Vector2<f64>>,
    pub source: CloudSource,
}

impl PointCloud2D {
    pub fn new(points: Vec<Vector2<f64>>, source: CloudSource) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("point cloud".into()));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Format("point cloud has non-finite coordinates".into()));
        }
        Ok(Self { points, source })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y")?;
        for p in &self.points {
            writeln!(out, "{},{}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, source: CloudSource) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "x,y" => {}
            _ => return Err(Error::Format("cloud CSV must start with header x,y".into())),
        }
        let mut points = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<csv>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',').map(|f| f.trim().parse::<f64>());
            match (fields.next(), fields.next(), fields.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => points.push(Vector2::new(x, y)),
                _ => return Err(Error::Format(format!("bad cloud row {}: {line:?}", n + 2))),
            }
        }
        Self::new(points, source)
    }
}

/// A projected capsule: segment endpoints and radius, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule2D {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
    pub radius: f64,
}

pub(crate) fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * s)).norm()
}

/// Union of capsule footprints; a pixel is set when its center lies strictly
/// inside some capsule.
pub fn rasterize_capsules(capsules: &[Capsule2D], width: usize, height: usize) -> Result<Mask> {
    let mut mask = Mask::new(width, height)?;
    for c in capsules {
        if !(c.radius > 0.0) {
            continue;
        }
        let lo = c.a.inf(&c.b).add_scalar(-c.radius);
        let hi = c.a.sup(&c.b).add_scalar(c.radius);
        let col0 = lo.x.floor().max(0.0) as usize;
        let row0 = lo.y.floor().max(0.0) as usize;
        let col1 = (hi.x.ceil().max(0.0) as usize).min(width);
        let row1 = (hi.y.ceil().max(0.0) as usize).min(height);
        for row in row0..row1 {
            for col in col0..col1 {
                let center = Vector2::new(col as f64 + 0.5, row as f64 + 0.5);
                if segment_distance(&center, &c.a, &c.b) < c.radius {
                    mask.set(col, row, true);
                }
            }
        }
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(mask)
}

/// Projected bone capsules of a posed body.
pub fn body_capsules(
    model: &BodyModel,
    beta: &ShapeParams,
    theta: &PoseParams,
    camera: &Camera,
) -> Result<Vec<Capsule2D>> {
    let attrs = model.bone_attributes(beta)?;
    let joints = camera.project(&model.posed_joints(beta, theta)?);
    Ok((0..model.bone_count())
        .map(|b| Capsule2D {
            a: joints[model.tree().parent(b + 1)],
            b: joints[b + 1],
            radius: attrs.radii[b] * camera.scale,
        })
        .collect())
}

pub fn rasterize_mask(
    model: &BodyModel,
    beta: &ShapeParams,
    theta: &PoseParams,
    camera: &Camera,
    width: usize,
    height: usize,
) -> Result<Mask> {
    rasterize_capsules(&body_capsules(model, beta, theta, camera)?, width, height)
}

/// `m` foreground pixel centers drawn uniformly with replacement.
pub fn sample_silhouette_cloud(mask: &Mask, m: usize, seed: u64) -> Result<PointCloud2D> {
    if m == 0 {
        return Err(Error::Config("silhouette sample count must be positive".into()));
    }
    let centers = mask.foreground_centers();
    if centers.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..m).map(|_| centers[rng.random_range(0..centers.len())]).collect();
    PointCloud2D::new(points, CloudSource::Silhouette)
}

/// A `cells × cells` grid laid over an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
    pub cells: usize,
}

impl SamplingGrid {
    pub fn bounding(points: &[Vector2<f64>], cells: usize) -> Self {
        let mut min = Vector2::repeat(f64::INFINITY);
        let mut max = Vector2::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        Self { min, max, cells }
    }

    fn axis_cell(&self, v: f64, lo: f64, hi: f64) -> usize {
        let extent = hi - lo;
        if !(extent > 0.0) {
            return 0;
        }
        let c = ((v - lo) / extent * self.cells as f64).floor();
        (c.max(0.0) as usize).min(self.cells - 1)
    }

    pub fn cell(&self, p: &Vector2<f64>) -> usize {
        let cx = self.axis_cell(p.x, self.min.x, self.max.x);
        let cy = self.axis_cell(p.y, self.min.y, self.max.y);
        cy * self.cells + cx
    }
}

/// Indices kept when capping every grid cell at `per_cell` points, lower
/// indices first. The result is ascending.
pub fn adaptive_sample_indices(points: &[Vector2<f64>], grid: &SamplingGrid, per_cell: usize) -> Vec<usize> {
    let mut counts = vec![0usize; grid.cells * grid.cells];
    let mut kept = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let c = grid.cell(p);
        if counts[c] < per_cell {
            counts[c] += 1;
            kept.push(i);
        }
    }
    kept
}

/// Thins projected vertices so that no cell of a `cells × cells` grid over
/// their bounding box holds more than `per_cell` of them.
pub fn adaptive_sample_vertices(projected: &[Vector2<f64>], cells: usize, per_cell: usize) -> Result<PointCloud2D> {
    if cells == 0 || per_cell == 0 {
        return Err(Error::Config("grid cells and per-cell cap must be positive".into()));
    }
    if projected.is_empty() {
        return Err(Error::Empty("projected vertices".into()));
    }
    let grid = SamplingGrid::bounding(projected, cells);
    let kept = adaptive_sample_indices(projected, &grid, per_cell);
    PointCloud2D::new(kept.iter().map(|&i| projected[i]).collect(), CloudSource::Vertices)
}

/// Noise standard deviation simulating capture at resolution `s`.
pub fn degradation_sigma(s: f64, sigma0: f64) -> f64 {
    sigma0 * (FULL_RESOLUTION / s - 1.0)
}

/// Simulates capture at `s × s` upscaled to full resolution: Gaussian jitter
/// of [`degradation_sigma`], then snapping to centers of the coarse pixel grid.
pub fn degrade_cloud(cloud: &PointCloud2D, s: f64, sigma0: f64, seed: u64) -> Result<PointCloud2D> {
    if !(MIN_DEGRADED_RESOLUTION..=FULL_RESOLUTION).contains(&s) {
        return Err(Error::Config(format!("resolution {s} outside [48, 224]")));
    }
    if !(sigma0 >= 0.0) {
        return Err(Error::Config(format!("sigma0 must be non-negative, got {sigma0}")));
    }
    let sigma = degradation_sigma(s, sigma0);
    let step = FULL_RESOLUTION / s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let snap = |v: f64| ((v / step).floor() + 0.5) * step;
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let q = if sigma > 0.0 {
                p + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                *p
            };
            Vector2::new(snap(q.x), snap(q.y))
        })
        .collect();
    PointCloud2D::new(points, cloud.source)
}

pub fn save_pgm(mask: &Mask, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    mask.write_pgm(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vertical_capsule(x: f64, radius: f64) -> Capsule2D {
        Capsule2D {
            a: Vector2::new(x, 60.0),
            b: Vector2::new(x, 160.0),
            radius,
        }
    }

    #[test]
    fn capsule_area_matches_analytic_footprint() {
        let r = 25.0;
        let mask = rasterize_capsules(&[vertical_capsule(112.0, r)], 224, 224).unwrap();
        let area = 2.0 * r * 100.0 + std::f64::consts::PI * r * r;
        let perimeter = 2.0 * 100.0 + 2.0 * std::f64::consts::PI * r;
        let count = mask.count() as f64;
        assert!((count - area).abs() <= perimeter, "count {count} vs area {area}");
    }

    #[test]
    fn shifting_camera_shifts_mask() {
        let a = rasterize_capsules(&[vertical_capsule(100.0, 10.0)], 224, 224).unwrap();
        let b = rasterize_capsules(&[vertical_capsule(105.0, 10.0)], 224, 224).unwrap();
        for row in 0..224 {
            for col in 0..219 {
                assert_eq!(a.get(col, row), b.get(col + 5, row));
            }
        }
    }

    #[test]
    fn zero_radius_is_empty() {
        assert!(matches!(
            rasterize_capsules(&[vertical_capsule(112.5, 0.0)], 224, 224),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn single_pixel_mask_samples_its_center() {
        let mut mask = Mask::new(8, 8).unwrap();
        mask.set(3, 4, true);
        let cloud = sample_silhouette_cloud(&mask, 5, 1).unwrap();
        assert_eq!(cloud.points, vec![Vector2::new(3.5, 4.5); 5]);
    }

    #[test]
    fn sampling_is_deterministic_and_inside() {
        let mask = rasterize_capsules(&[vertical_capsule(80.0, 12.0)], 224, 224).unwrap();
        let a = sample_silhouette_cloud(&mask, 400, 9).unwrap();
        let b = sample_silhouette_cloud(&mask, 400, 9).unwrap();
        assert_eq!(a, b);
        for p in &a.points {
            assert!(mask.get(p.x as usize, p.y as usize));
            assert_eq!(p.x.fract(), 0.5);
        }
        assert!(matches!(
            sample_silhouette_cloud(&Mask::new(4, 4).unwrap(), 3, 0),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn adaptive_sampling_hand_layout() {
        // bounding box [0,10]²; four points in the lower-left cell
        let pts = [
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(2.0, 1.0),
            Vector2::new(1.0, 2.0),
            Vector2::new(10.0, 10.0),
        ];
        let out = adaptive_sample_vertices(&pts, 2, 1).unwrap();
        assert_eq!(out.points, vec![pts[0], pts[4]]);
    }

    #[test]
    fn adaptive_sampling_distinct_cells_is_noop() {
        let pts = [Vector2::new(0.0, 0.0), Vector2::new(9.0, 1.0), Vector2::new(1.0, 9.0), Vector2::new(9.0, 9.0)];
        let out = adaptive_sample_vertices(&pts, 2, 1).unwrap();
        assert_eq!(out.points, pts.to_vec());
    }

    #[test]
    fn degradation_examples() {
        assert_eq!(degradation_sigma(224.0, 0.5), 0.0);
        assert_eq!(degradation_sigma(112.0, 0.5), 0.5);
        let cloud = PointCloud2D::new(vec![Vector2::new(3.5, 7.5), Vector2::new(100.5, 0.5)], CloudSource::Silhouette).unwrap();
        assert_eq!(degrade_cloud(&cloud, 224.0, 0.0, 3).unwrap(), cloud);
        assert!(matches!(degrade_cloud(&cloud, 47.0, 0.5, 3), Err(Error::Config(_))));
        assert!(matches!(degrade_cloud(&cloud, 225.0, 0.5, 3), Err(Error::Config(_))));
    }

    #[test]
    fn pgm_and_csv_round_trip() {
        let mask = rasterize_capsules(&[vertical_capsule(50.0, 7.0)], 64, 200).unwrap();
        let mut bytes = Vec::new();
        mask.write_pgm(&mut bytes).unwrap();
        assert!(bytes.starts_with(b"P5\n64 200\n255\n"));
        assert_eq!(Mask::read_pgm(bytes.as_slice()).unwrap(), mask);

        let cloud = sample_silhouette_cloud(&mask, 20, 4).unwrap();
        let mut text = Vec::new();
        cloud.write_csv(&mut text).unwrap();
        assert!(text.starts_with(b"x,y\n"));
        assert_eq!(PointCloud2D::read_csv(text.as_slice(), CloudSource::Silhouette).unwrap(), cloud);
    }

    fn cloud_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 1..200)
    }

    proptest! {
        #[test]
        fn cells_never_exceed_cap(raw in cloud_strategy(), cells in 1usize..8, cap in 1usize..4) {
            let pts: Vec<_> = raw.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
            let grid = SamplingGrid::bounding(&pts, cells);
            let kept = adaptive_sample_indices(&pts, &grid, cap);
            let mut counts = vec![0; cells * cells];
            for &i in &kept {
                counts[grid.cell(&pts[i])] += 1;
            }
            prop_assert!(counts.iter().all(|&c| c <= cap));
            prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn fixed_grid_sampling_is_idempotent(raw in cloud_strategy(), cells in 1usize..8, cap in 1usize..4) {
            let pts: Vec<_> = raw.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
            let grid = SamplingGrid::bounding(&pts, cells);
            let once: Vec<_> = adaptive_sample_indices(&pts, &grid, cap).iter().map(|&i| pts[i]).collect();
            let twice: Vec<_> = adaptive_sample_indices(&once, &grid, cap).iter().map(|&i| once[i]).collect();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn degraded_points_lie_on_coarse_grid(raw in cloud_strategy(), s in 48.0f64..=224.0, seed in 0u64..100) {
            let pts: Vec<_> = raw.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
            let cloud = PointCloud2D::new(pts, CloudSource::Silhouette).unwrap();
            let out = degrade_cloud(&cloud, s, 0.5, seed).unwrap();
            let step = FULL_RESOLUTION / s;
            for p in &out.points {
                for v in [p.x, p.y] {
                    let k = v / step - 0.5;
                    prop_assert!((k - k.round()).abs() < 1e-9);
                }
            }
        }
    }
}
