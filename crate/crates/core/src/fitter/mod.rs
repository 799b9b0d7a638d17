//! Per-subsequence recovery of shape, pose and camera from silhouette clouds
//! and 2D keypoints.
//!
//! Each frame carries its own `β`, `θ` and camera; a consistency penalty ties
//! the frame shapes together and the mean shape is the subsequence feature.

mod init;
mod objective;
mod solve;

use std::ops::Range;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::body::{Camera, PoseParams, ShapeParams, ViewAngles};
use crate::error::{check_len, Error, Result};
use crate::losses::LossWeights;
use crate::optim::AdamConfig;
use crate::silhouette::PointCloud2D;

pub use init::{init_camera, init_frame, init_pose, init_subsequence};
pub use objective::{Evaluation, FitParams, Objective};
pub use solve::fit_subsequence;

/// Step sizes per parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSizes {
    pub beta: f64,
    pub theta: f64,
    pub scale: f64,
    pub trans: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            beta: 0.01,
            theta: 0.01,
            scale: 0.1,
            trans: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Frames per subsequence.
    pub seq_len: usize,
    pub max_iters: usize,
    pub steps: StepSizes,
    pub adam: AdamConfig,
    /// Stop once the relative change of the total loss over `window` iterations drops below this.
    pub rel_tol: f64,
    pub window: usize,
    pub weights: LossWeights,
    /// Adaptive sampling grid resolution and per-cell cap.
    pub grid_cells: usize,
    pub per_cell: usize,
    /// Bound on every shape coefficient, enforced after each step.
    pub beta_bound: f64,
    /// Standard deviation of the seeded perturbation added to the initial
    /// non-root joint rotations; zero gives a seed-independent start.
    pub init_jitter: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            seq_len: 5,
            max_iters: 300,
            steps: StepSizes::default(),
            adam: AdamConfig::default(),
            rel_tol: 1e-6,
            window: 10,
            weights: LossWeights::default(),
            grid_cells: 16,
            per_cell: 2,
            beta_bound: 5.0,
            init_jitter: 0.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.seq_len == 0 {
            return fail("seq_len must be at least 1");
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1");
        }
        if !(self.rel_tol > 0.0) || self.window == 0 {
            return fail("convergence tolerance and window must be positive");
        }
        let s = &self.steps;
        if [s.beta, s.theta, s.scale, s.trans].iter().any(|x| !(*x >= 0.0)) {
            return fail("step sizes must be non-negative");
        }
        let w = &self.weights;
        if [w.chamfer, w.keypoint, w.consistency].iter().any(|x| !(*x >= 0.0)) {
            return fail("loss weights must be non-negative");
        }
        if self.grid_cells == 0 || self.per_cell == 0 {
            return fail("sampling grid and per-cell cap must be positive");
        }
        if !(self.beta_bound > 0.0) || !(self.init_jitter >= 0.0) {
            return fail("beta bound must be positive and jitter non-negative");
        }
        self.adam.validate()
    }
}

/// Observations of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub cloud: PointCloud2D,
    pub keypoints: Vec<Vector2<f64>>,
    pub visible: Vec<bool>,
}

impl FrameObservation {
    pub fn new(cloud: PointCloud2D, keypoints: Vec<Vector2<f64>>) -> Self {
        let visible = vec![true; keypoints.len()];
        Self {
            cloud,
            keypoints,
            visible,
        }
    }

    pub(crate) fn check(&self, keypoint_count: usize) -> Result<()> {
        if self.cloud.is_empty() {
            return Err(Error::Empty("silhouette cloud".into()));
        }
        check_len("keypoints", keypoint_count, self.keypoints.len())?;
        check_len("keypoint visibility", keypoint_count, self.visible.len())?;
        if !self.visible.iter().any(|&v| v) {
            return Err(Error::NoVisibleKeypoints);
        }
        Ok(())
    }
}

/// Loss terms attributed to a single frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameLosses {
    pub chamfer: f64,
    pub keypoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFit {
    pub beta: ShapeParams,
    pub theta: PoseParams,
    pub camera: Camera,
    pub view: ViewAngles,
    pub losses: FrameLosses,
}

/// Weighted objective terms summed over the frames of a subsequence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitLosses {
    pub total: f64,
    pub chamfer: f64,
    pub keypoint: f64,
    pub consistency: f64,
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    pub losses: FitLosses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceFit {
    pub frames: Vec<FrameFit>,
    /// Mean of the frame shapes: the biometric shape feature.
    pub feature: Vec<f64>,
    /// Component-wise median of the frame view angles.
    pub median_view: ViewAngles,
    /// Terms at the returned iterate.
    pub losses: FitLosses,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<LossRecord>,
}

pub(crate) fn mean_beta(frames: &[FrameFit]) -> Vec<f64> {
    let dims = frames[0].beta.len();
    let mut mean = vec![0.0; dims];
    for f in frames {
        for (m, b) in mean.iter_mut().zip(f.beta.as_slice()) {
            *m += b;
        }
    }
    mean.iter_mut().for_each(|m| *m /= frames.len() as f64);
    mean
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn median_view(views: &[ViewAngles]) -> ViewAngles {
    let pick = |f: fn(&ViewAngles) -> f64| median(&mut views.iter().map(f).collect::<Vec<_>>());
    ViewAngles {
        yaw: pick(|v| v.yaw),
        pitch: pick(|v| v.pitch),
        roll: pick(|v| v.roll),
    }
}

/// Consecutive windows of `seq_len` frames. A trailing remainder shorter than
/// half a window (rounded up) joins the window before it; a sequence shorter
/// than one window is kept whole.
pub fn split_sequence(frames: usize, seq_len: usize) -> Vec<Range<usize>> {
    let seq_len = seq_len.max(1);
    let mut windows: Vec<Range<usize>> = (0..frames)
        .step_by(seq_len)
        .map(|start| start..(start + seq_len).min(frames))
        .collect();
    if windows.len() >= 2 {
        let last = windows.last().unwrap().len();
        if last < seq_len.div_ceil(2) {
            let tail = windows.pop().unwrap();
            windows.last_mut().unwrap().end = tail.end;
        }
    }
    windows
}

#[cfg(test)]
mod tests;
