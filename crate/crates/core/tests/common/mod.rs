//! Oracles shared by the integration tests.

#![allow(dead_code)]

use bodyid::body::{BodyModel, Camera, ModelConfig, PoseParams, ShapeParams};
use bodyid::fitter::{FitConfig, FitParams, FrameObservation, Objective};
use bodyid::silhouette::{CloudSource, PointCloud2D};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
pub const FD_POINTS: usize = 100;

/// Central differences of `f` at `x`, one coordinate at a time. A coordinate
/// whose probe crosses onto another smooth piece (as reported by `same_piece`)
/// is left as `None`.
pub fn central_diff(
    x: &[f64],
    h: f64,
    mut f: impl FnMut(&[f64]) -> f64,
    mut same_piece: impl FnMut(&[f64]) -> bool,
) -> Vec<Option<f64>> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let (up, up_ok) = (f(&probe), same_piece(&probe));
            probe[i] = x[i] - h;
            let (down, down_ok) = (f(&probe), same_piece(&probe));
            probe[i] = x[i];
            (up_ok && down_ok).then(|| (up - down) / (2.0 * h))
        })
        .collect()
}

/// Norm-wise relative error over the coordinates that have a numerical value,
/// and how many of them there were.
pub fn relative_error(analytic: &[f64], numeric: &[Option<f64>]) -> (f64, usize) {
    assert_eq!(analytic.len(), numeric.len());
    let (mut diff, mut na, mut nn, mut used) = (0.0, 0.0, 0.0, 0);
    for (a, n) in analytic.iter().zip(numeric) {
        if let Some(n) = n {
            diff += (a - n) * (a - n);
            na += a * a;
            nn += n * n;
            used += 1;
        }
    }
    (diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-12), used)
}

pub fn flat(points: &[Vector2<f64>]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

pub fn unflat(x: &[f64]) -> Vec<Vector2<f64>> {
    x.chunks_exact(2).map(|c| Vector2::new(c[0], c[1])).collect()
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Vector2<f64>> {
    (0..n)
        .map(|_| Vector2::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent)))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random fitting problem near a plausible body: the observations are made
/// from one parameter set and the returned point is a perturbation of it.
pub struct FitProblem {
    pub model: BodyModel,
    pub frames: Vec<FrameObservation>,
    pub point: FitParams,
}

pub fn model() -> BodyModel {
    BodyModel::synthesize(3, &ModelConfig::default()).unwrap()
}

pub fn fit_problem(model: &BodyModel, rng: &mut ChaCha8Rng, frames: usize, cloud: usize) -> FitProblem {
    let n = Normal::new(0.0, 1.0).unwrap();
    let g = |rng: &mut ChaCha8Rng, s: f64| s * n.sample(rng);
    let truth_beta: Vec<f64> = (0..model.shape_dims()).map(|_| g(rng, 0.8)).collect();
    let mut obs = Vec::new();
    let mut start = Vec::new();
    for _ in 0..frames {
        let mut theta = PoseParams::identity(model.joint_count());
        theta.0[0] = Vector3::new(g(rng, 0.1), g(rng, 1.0), g(rng, 0.1));
        for r in theta.0.iter_mut().skip(1) {
            *r = Vector3::new(g(rng, 0.2), g(rng, 0.2), g(rng, 0.2));
        }
        let camera = Camera::new(100.0 + g(rng, 5.0), 112.0 + g(rng, 5.0), 112.0 + g(rng, 5.0)).unwrap();
        let beta = ShapeParams(truth_beta.clone());
        let verts = model.lbs(&beta, &theta).unwrap();
        let projected = camera.project(&verts);
        let points: Vec<Vector2<f64>> = (0..cloud)
            .map(|_| {
                let i = rng.random_range(0..projected.len());
                projected[i] + Vector2::new(g(rng, 1.5), g(rng, 1.5))
            })
            .collect();
        let mut keypoints = model.keypoints(&beta, &theta, &camera).unwrap();
        for k in keypoints.iter_mut() {
            *k += Vector2::new(g(rng, 2.0), g(rng, 2.0));
        }
        obs.push(FrameObservation::new(
            PointCloud2D::new(points, CloudSource::Silhouette).unwrap(),
            keypoints,
        ));

        let beta0 = ShapeParams(truth_beta.iter().map(|b| b + g(rng, 0.3)).collect());
        let theta0 = PoseParams(theta.0.iter().map(|r| r + Vector3::new(g(rng, 0.05), g(rng, 0.05), g(rng, 0.05))).collect());
        let camera0 = Camera::new(camera.scale * (1.0 + g(rng, 0.03)), camera.trans.x + g(rng, 2.0), camera.trans.y + g(rng, 2.0)).unwrap();
        start.push((beta0, theta0, camera0));
    }
    FitProblem {
        point: FitParams::new(model, &start),
        model: model.clone(),
        frames: obs,
    }
}

/// Analytic and numerical gradients of the full fitting objective at the
/// problem's point.
pub fn objective_check(p: &FitProblem, cfg: &FitConfig) -> (f64, usize) {
    let objective = Objective {
        model: &p.model,
        frames: &p.frames,
        cfg,
    };
    let base = objective.evaluate(&p.point).unwrap();
    let at = |x: &[f64]| {
        let mut q = p.point.clone();
        q.values.copy_from_slice(x);
        objective.evaluate(&q).unwrap()
    };
    // The two closures re-evaluate; cache the last probe to halve the cost.
    let cache = std::cell::RefCell::new((Vec::new(), None));
    let eval = |x: &[f64]| {
        let mut c = cache.borrow_mut();
        if c.0 != x || c.1.is_none() {
            *c = (x.to_vec(), Some(at(x)));
        }
        c.1.clone().unwrap()
    };
    let numeric = central_diff(
        &p.point.values,
        FD_STEP,
        |x| eval(x).losses.total,
        |x| eval(x).selection == base.selection,
    );
    relative_error(&base.gradient, &numeric)
}
