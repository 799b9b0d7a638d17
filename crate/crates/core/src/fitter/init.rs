use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FitConfig, FrameObservation};
use crate::body::{BodyModel, Camera, PoseParams, ShapeParams, NOMINAL_BODY_HEIGHT_M};
use crate::rotation::rodrigues;
use crate::error::{Error, Result};

/// Camera whose scale maps the keypoint bounding-box height to the nominal
/// body height and whose translation is the box centre.
pub fn init_camera(keypoints: &[Vector2<f64>]) -> Result<Camera> {
    if keypoints.is_empty() {
        return Err(Error::Empty("keypoints".into()));
    }
    let mut lo = Vector2::repeat(f64::INFINITY);
    let mut hi = Vector2::repeat(f64::NEG_INFINITY);
    for k in keypoints {
        lo = lo.inf(k);
        hi = hi.sup(k);
    }
    let height = hi.y - lo.y;
    if !(height >= 1.0) {
        return Err(Error::DegenerateBBox(height));
    }
    let centre = (lo + hi) * 0.5;
    Camera::new(height / NOMINAL_BODY_HEIGHT_M, centre.x, centre.y)
}

/// Rest pose turned about the vertical axis to face the way the keypoints do.
///
/// The image x-offsets of the shoulder span and of the nose relative to the
/// head are linear in `(cos yaw, sin yaw)` with coefficients taken from the
/// rest skeleton, so the two measurements fix the yaw including its
/// hemisphere. Models without named landmarks start facing the camera.
pub fn init_pose(model: &BodyModel, keypoints: &[Vector2<f64>], camera: &Camera) -> PoseParams {
    let mut theta = PoseParams::identity(model.joint_count());
    let Some(lm) = model.landmarks() else {
        return theta;
    };
    let rest = model
        .regress_joints(&ShapeParams::zeros(model.shape_dims()))
        .expect("zero shape has the model's dimensions");
    let span = rest[lm.left_shoulder] - rest[lm.right_shoulder];
    let nose = rest[lm.nose] - rest[lm.head];
    let a = (keypoints[lm.left_shoulder].x - keypoints[lm.right_shoulder].x) / camera.scale;
    let b = (keypoints[lm.nose].x - keypoints[lm.head].x) / camera.scale;
    // Ry(yaw) sends (x, ·, z) to x·cos + z·sin along the image x axis.
    let det = span.x * nose.z - span.z * nose.x;
    if det.abs() < 1e-12 {
        return theta;
    }
    let cos = (a * nose.z - b * span.z) / det;
    let sin = (span.x * b - nose.x * a) / det;
    if cos == 0.0 && sin == 0.0 {
        return theta;
    }
    theta.0[0] = Vector3::new(0.0, sin.atan2(cos), 0.0);
    theta
}

/// Starting shape, pose and camera for one frame.
pub fn init_frame(
    model: &BodyModel,
    obs: &FrameObservation,
    cfg: &FitConfig,
    seed: u64,
) -> Result<(ShapeParams, PoseParams, Camera)> {
    let visible: Vec<Vector2<f64>> = obs
        .keypoints
        .iter()
        .zip(&obs.visible)
        .filter(|(_, &v)| v)
        .map(|(k, _)| *k)
        .collect();
    let camera = init_camera(&visible)?;
    let landmarks_visible = model.landmarks().is_some_and(|lm| {
        [lm.left_shoulder, lm.right_shoulder, lm.head, lm.nose]
            .iter()
            .all(|&j| obs.visible[j])
    });
    let mut theta = if landmarks_visible {
        init_pose(model, &obs.keypoints, &camera)
    } else {
        PoseParams::identity(model.joint_count())
    };
    if cfg.init_jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, cfg.init_jitter).map_err(|e| Error::Config(e.to_string()))?;
        for r in theta.0.iter_mut().skip(1) {
            *r += Vector3::from_fn(|_, _| noise.sample(&mut rng));
        }
    }
    Ok((ShapeParams::zeros(model.shape_dims()), theta, camera))
}

/// Bones whose projected rest direction is shorter than this fraction of
/// their length are too foreshortened to measure.
const MIN_VISIBLE_FRACTION: f64 = 0.5;

/// Starting state of every frame of a subsequence.
///
/// Each frame gets the camera from its keypoint box and the yaw from
/// [`init_pose`]. The length coefficients, shared by all frames, and each
/// frame's camera scale are then refined jointly by least squares on the log
/// lengths of the observed 2D bones, assuming the rest pose:
/// `log |o_b| − log |P R d_b L_b| = log s_t + (S β)_b`.
pub fn init_subsequence(
    model: &BodyModel,
    frames: &[FrameObservation],
    cfg: &FitConfig,
    seed: u64,
) -> Result<Vec<(ShapeParams, PoseParams, Camera)>> {
    let mut starts = frames
        .iter()
        .enumerate()
        .map(|(t, f)| init_frame(model, f, cfg, seed.wrapping_add(t as u64)))
        .collect::<Result<Vec<_>>>()?;
    let k = model.length_components();
    if k == 0 {
        return Ok(starts);
    }
    let tree = model.tree();
    let lengths = model.template_lengths();
    let t_count = frames.len();
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (t, (obs, (_, theta, _))) in frames.iter().zip(&starts).enumerate() {
        let root = rodrigues(&theta.root());
        for (b, &length) in lengths.iter().enumerate() {
            let (p, c) = (tree.parent(b + 1), b + 1);
            if !(obs.visible[p] && obs.visible[c]) {
                continue;
            }
            let dir = (root * tree.rest_dirs()[b]).xy().norm();
            let observed = (obs.keypoints[c] - obs.keypoints[p]).norm();
            if dir < MIN_VISIBLE_FRACTION || observed < 1.0 {
                continue;
            }
            rows.push((t, b, observed.ln() - (dir * length).ln()));
        }
    }
    if rows.len() < k + t_count {
        return Ok(starts);
    }
    let basis = model.shape_basis();
    let a = DMatrix::from_fn(rows.len(), t_count + k, |r, c| {
        let (t, b, _) = rows[r];
        if c < t_count {
            f64::from(u8::from(c == t))
        } else {
            basis[(b, c - t_count)]
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2));
    let Ok(x) = a.svd(true, true).solve(&y, 1e-10) else {
        return Ok(starts);
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Ok(starts);
    }
    for (t, ((beta, theta, camera), obs)) in starts.iter_mut().zip(frames).enumerate() {
        for c in 0..k {
            beta.0[c] = x[t_count + c].clamp(-cfg.beta_bound, cfg.beta_bound);
        }
        let scale = x[t].exp();
        let joints = model.posed_joints(beta, theta)?;
        let mut offset = Vector2::zeros();
        let mut n = 0.0;
        for ((j, kp), &vis) in joints.iter().zip(&obs.keypoints).zip(&obs.visible) {
            if vis {
                offset += kp - j.xy() * scale;
                n += 1.0;
            }
        }
        *camera = Camera::new(scale, offset.x / n, offset.y / n)?;
    }
    Ok(starts)
}
