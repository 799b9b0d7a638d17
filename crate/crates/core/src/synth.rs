//! Synthetic subjects and video-like sequences with known ground truth.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::body::{BodyModel, Camera, PoseParams, ShapeParams, ViewAngles};
use crate::error::{Error, Result};
use crate::fitter::{FrameFit, FrameLosses, FrameObservation};
use crate::rotation::{compose_yaw_pitch_roll, log_map, wrap_angle};
use crate::silhouette::{degrade_cloud, rasterize_mask, sample_silhouette_cloud, FULL_RESOLUTION, MIN_DEGRADED_RESOLUTION};

/// Camera elevation of the "elevated" capture condition.
pub const ELEVATED_PITCH: f64 = 30.0 * PI / 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Standard deviation of identity shape coefficients.
    pub identity_sigma: f64,
    /// Identity coefficients are redrawn until they fall inside `±identity_bound`.
    pub identity_bound: f64,
    pub clothing_variants: usize,
    /// Standard deviation of the clothing offset on girth coefficients.
    pub clothing_sigma: f64,
    /// Silhouette points sampled per frame.
    pub cloud_points: usize,
    /// Square image side in pixels.
    pub image_size: usize,
    /// Fraction of the image height the body's nominal height spans.
    pub body_fill: f64,
    /// Positional jitter at the coarsest resolution scale, see [`crate::silhouette::degradation_sigma`].
    pub degradation_sigma0: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            identity_sigma: 0.5,
            identity_bound: 3.0,
            clothing_variants: 2,
            clothing_sigma: 0.05,
            cloud_points: 400,
            image_size: FULL_RESOLUTION as usize,
            body_fill: 0.75,
            degradation_sigma0: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.identity_sigma >= 0.0 && self.identity_bound > 0.0 && self.clothing_sigma >= 0.0) {
            return Err(Error::Config("population spreads must be non-negative".into()));
        }
        if self.clothing_variants == 0 || self.cloud_points == 0 || self.image_size < 16 {
            return Err(Error::Config("clothing variants, cloud points and image size must be positive".into()));
        }
        if !(self.body_fill > 0.0 && self.body_fill <= 1.0) {
            return Err(Error::Config("body_fill must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub identity: ShapeParams,
    /// Full shape of each clothing variant: identity plus a girth-only offset.
    pub clothing: Vec<ShapeParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub seed: u64,
    pub subjects: Vec<Subject>,
}

impl Population {
    pub fn subject(&self, id: &str) -> Option<&Subject> {
        self.subjects.iter().find(|s| s.id == id)
    }
}

pub fn subject_id(index: usize) -> String {
    format!("s{index:04}")
}

pub fn generate_population(model: &BodyModel, n_subjects: usize, cfg: &SynthConfig, seed: u64) -> Result<Population> {
    cfg.validate()?;
    if n_subjects < 2 {
        return Err(Error::Config(format!("need at least 2 subjects, got {n_subjects}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let identity = Normal::new(0.0, cfg.identity_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let clothing = Normal::new(0.0, cfg.clothing_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let girth = model.girth_components();
    let subjects = (0..n_subjects)
        .map(|i| {
            let beta: Vec<f64> = (0..model.shape_dims())
                .map(|_| loop {
                    let x = identity.sample(&mut rng);
                    if x.abs() <= cfg.identity_bound {
                        break x;
                    }
                })
                .collect();
            let variants = (0..cfg.clothing_variants)
                .map(|_| {
                    let mut b = beta.clone();
                    for c in girth.clone() {
                        b[c] += clothing.sample(&mut rng);
                    }
                    ShapeParams(b)
                })
                .collect();
            Subject {
                id: subject_id(i),
                identity: ShapeParams(beta),
                clothing: variants,
            }
        })
        .collect();
    Ok(Population { seed, subjects })
}

/// Root yaw over the frames of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum YawTrajectory {
    Constant { yaw: f64 },
    /// Linear sweep from `from` at the first frame to `to` at the last.
    Sweep { from: f64, to: f64 },
    /// One uniformly drawn yaw held for the whole sequence.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub subject: String,
    pub clothing: usize,
    pub frames: usize,
    pub yaw: YawTrajectory,
    pub pitch: f64,
    /// Effective capture resolution `s`.
    pub resolution: f64,
    /// Keypoint noise standard deviation in pixels.
    pub keypoint_sigma: f64,
    /// Per-frame step of the joint random walk in radians; zero keeps the rest pose.
    pub pose_step: f64,
    /// Bound on each joint's rotation angle.
    pub pose_bound: f64,
    pub seed: u64,
}

impl SequenceSpec {
    /// Full resolution, light keypoint noise, frontal yaw sweep.
    pub fn controlled(subject: &str, clothing: usize, frames: usize, seed: u64) -> Self {
        Self {
            subject: subject.to_string(),
            clothing,
            frames,
            yaw: YawTrajectory::Sweep {
                from: -PI / 3.0,
                to: PI / 3.0,
            },
            pitch: 0.0,
            resolution: FULL_RESOLUTION,
            keypoint_sigma: 0.5,
            pose_step: 0.05,
            pose_bound: 0.3,
            seed,
        }
    }

    /// Degraded resolution, heavier keypoint noise, random yaw, optionally
    /// seen from an elevated camera.
    pub fn field(subject: &str, clothing: usize, frames: usize, resolution: f64, elevated: bool, seed: u64) -> Self {
        Self {
            yaw: YawTrajectory::Random,
            pitch: if elevated { ELEVATED_PITCH } else { 0.0 },
            resolution,
            keypoint_sigma: 2.0,
            ..Self::controlled(subject, clothing, frames, seed)
        }
    }

    /// Noise-free observations of a still body.
    pub fn noiseless(mut self) -> Self {
        self.keypoint_sigma = 0.0;
        self.pose_step = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Config("a sequence needs at least one frame".into()));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&self.pitch) {
            return Err(Error::Config(format!("pitch {} outside [-π/2, π/2]", self.pitch)));
        }
        if !(MIN_DEGRADED_RESOLUTION..=FULL_RESOLUTION).contains(&self.resolution) {
            return Err(Error::Config(format!("resolution {} outside [48, 224]", self.resolution)));
        }
        if !(self.keypoint_sigma >= 0.0 && self.pose_step >= 0.0 && self.pose_bound >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub observation: FrameObservation,
    pub truth: FrameFit,
}

fn camera_for(
    model: &BodyModel,
    beta: &ShapeParams,
    theta: &PoseParams,
    cfg: &SynthConfig,
    scale: f64,
) -> Result<(Camera, bool)> {
    let joints = model.posed_joints(beta, theta)?;
    let verts = model.lbs(beta, theta)?;
    let mut lo = Vector2::repeat(f64::INFINITY);
    let mut hi = Vector2::repeat(f64::NEG_INFINITY);
    for p in joints.iter().chain(&verts) {
        lo = lo.inf(&p.xy());
        hi = hi.sup(&p.xy());
    }
    let size = cfg.image_size as f64;
    let centre = Vector2::repeat(size / 2.0) - (lo + hi) * (scale / 2.0);
    let camera = Camera::new(scale, centre.x, centre.y)?;
    let fits = (hi - lo).max() * scale <= size;
    Ok((camera, fits))
}

/// Renders the frames of one sequence.
pub fn generate_sequence(
    model: &BodyModel,
    population: &Population,
    spec: &SequenceSpec,
    cfg: &SynthConfig,
) -> Result<Vec<SyntheticFrame>> {
    cfg.validate()?;
    spec.validate()?;
    let subject = population
        .subject(&spec.subject)
        .ok_or_else(|| Error::Config(format!("unknown subject {}", spec.subject)))?;
    let beta = subject
        .clothing
        .get(spec.clothing)
        .ok_or_else(|| Error::Config(format!("subject {} has no clothing variant {}", subject.id, spec.clothing)))?
        .clone();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let step = Normal::new(0.0, spec.pose_step.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let kp_noise = Normal::new(0.0, spec.keypoint_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let random_yaw = rng.random_range(-PI..PI);
    let size = cfg.image_size as f64;
    let nominal_scale = cfg.body_fill * size / crate::body::NOMINAL_BODY_HEIGHT_M;

    let mut joints = vec![Vector3::zeros(); model.joint_count()];
    let mut frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        if spec.pose_step > 0.0 {
            for r in joints.iter_mut().skip(1) {
                *r += Vector3::from_fn(|_, _| step.sample(&mut rng));
                let n = r.norm();
                if n > spec.pose_bound {
                    *r *= spec.pose_bound / n;
                }
            }
        }
        let yaw = match spec.yaw {
            YawTrajectory::Constant { yaw } => yaw,
            YawTrajectory::Sweep { from, to } if spec.frames > 1 => from + (to - from) * t as f64 / (spec.frames - 1) as f64,
            YawTrajectory::Sweep { from, .. } => from,
            YawTrajectory::Random => random_yaw,
        };
        let mut theta = PoseParams(joints.clone());
        theta.0[0] = log_map(&compose_yaw_pitch_roll(yaw, spec.pitch, 0.0));

        let (mut camera, fits) = camera_for(model, &beta, &theta, cfg, nominal_scale)?;
        if !fits {
            let (retry, fits) = camera_for(model, &beta, &theta, cfg, 0.8 * nominal_scale)?;
            if !fits {
                return Err(Error::Format(format!("body does not fit the image in frame {t}")));
            }
            camera = retry;
        }

        let mask = rasterize_mask(model, &beta, &theta, &camera, cfg.image_size, cfg.image_size)?;
        let cloud = sample_silhouette_cloud(&mask, cfg.cloud_points, rng.random())?;
        let degrade_seed: u64 = rng.random();
        let cloud = if spec.resolution < FULL_RESOLUTION {
            degrade_cloud(&cloud, spec.resolution, cfg.degradation_sigma0, degrade_seed)?
        } else {
            cloud
        };
        let mut keypoints = model.keypoints(&beta, &theta, &camera)?;
        if spec.keypoint_sigma > 0.0 {
            for k in &mut keypoints {
                *k += Vector2::new(kp_noise.sample(&mut rng), kp_noise.sample(&mut rng));
            }
        }
        let view = ViewAngles {
            yaw: wrap_angle(yaw),
            pitch: spec.pitch,
            roll: 0.0,
        };
        frames.push(SyntheticFrame {
            observation: FrameObservation::new(cloud, keypoints),
            truth: FrameFit {
                beta: beta.clone(),
                theta,
                camera,
                view,
                losses: FrameLosses::default(),
            },
        });
    }
    Ok(frames)
}
