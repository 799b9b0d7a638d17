use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::{FitConfig, FitLosses, FrameLosses, FrameObservation};
use crate::body::{BodyModel, Camera, PoseParams, ShapeParams};
use crate::error::{Error, Result};
use crate::losses::{chamfer_with_assignments, keypoint_loss, shape_consistency};
use crate::silhouette::{adaptive_sample_indices, SamplingGrid};

/// Shape, pose and camera of every frame, stored flat as
/// `[β (B) | θ (3J) | scale | tx | ty]` per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    pub values: Vec<f64>,
    shape_dims: usize,
    joints: usize,
}

impl FitParams {
    pub fn new(model: &BodyModel, frames: &[(ShapeParams, PoseParams, Camera)]) -> Self {
        let mut values = Vec::new();
        for (beta, theta, camera) in frames {
            values.extend_from_slice(beta.as_slice());
            for r in &theta.0 {
                values.extend_from_slice(r.as_slice());
            }
            values.extend([camera.scale, camera.trans.x, camera.trans.y]);
        }
        Self {
            values,
            shape_dims: model.shape_dims(),
            joints: model.joint_count(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.shape_dims + 3 * self.joints + 3
    }

    pub fn frame_count(&self) -> usize {
        self.values.len() / self.frame_len()
    }

    fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn beta(&self, t: usize) -> ShapeParams {
        ShapeParams(self.frame(t)[..self.shape_dims].to_vec())
    }

    pub fn theta(&self, t: usize) -> PoseParams {
        let f = &self.frame(t)[self.shape_dims..self.shape_dims + 3 * self.joints];
        PoseParams(f.chunks_exact(3).map(Vector3::from_column_slice).collect())
    }

    /// The camera as stored; the scale may be non-positive mid-optimization.
    pub fn camera(&self, t: usize) -> Camera {
        let f = &self.frame(t)[self.shape_dims + 3 * self.joints..];
        Camera {
            scale: f[0],
            trans: Vector2::new(f[1], f[2]),
        }
    }

    /// Per-coordinate step sizes matching the layout.
    pub(crate) fn step_sizes(&self, cfg: &FitConfig) -> Vec<f64> {
        let mut block = vec![cfg.steps.beta; self.shape_dims];
        block.extend(std::iter::repeat_n(cfg.steps.theta, 3 * self.joints));
        block.extend([cfg.steps.scale, cfg.steps.trans, cfg.steps.trans]);
        block.repeat(self.frame_count())
    }

    pub(crate) fn clamp_betas(&mut self, bound: f64) {
        let n = self.frame_len();
        for frame in self.values.chunks_exact_mut(n) {
            for b in &mut frame[..self.shape_dims] {
                *b = b.clamp(-bound, bound);
            }
        }
    }
}

/// Value, gradient and the discrete choices made while evaluating them.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub losses: FitLosses,
    pub frame_losses: Vec<FrameLosses>,
    pub gradient: Vec<f64>,
    /// Sampled vertex indices and nearest-neighbour assignments of every
    /// frame. The objective is smooth wherever this stays unchanged.
    pub selection: Vec<Vec<usize>>,
}

/// The weighted fitting objective over one subsequence.
pub struct Objective<'a> {
    pub model: &'a BodyModel,
    pub frames: &'a [FrameObservation],
    pub cfg: &'a FitConfig,
}

struct FrameTerms {
    chamfer: f64,
    keypoint: f64,
    gradient: Vec<f64>,
    selection: Vec<usize>,
}

impl Objective<'_> {
    pub fn evaluate(&self, params: &FitParams) -> Result<Evaluation> {
        if params.frame_count() != self.frames.len() {
            return Err(Error::Shape {
                what: "fit frames",
                expected: self.frames.len(),
                got: params.frame_count(),
            });
        }
        let terms: Vec<FrameTerms> = (0..self.frames.len())
            .into_par_iter()
            .map(|t| self.frame_terms(params, t))
            .collect::<Result<_>>()?;

        let w = &self.cfg.weights;
        let betas: Vec<Vec<f64>> = (0..self.frames.len()).map(|t| params.beta(t).0).collect();
        let consistency = shape_consistency(&betas)?;
        let mut gradient = Vec::with_capacity(params.values.len());
        let dims = params.shape_dims;
        for (t, ft) in terms.iter().enumerate() {
            let mut g = ft.gradient.clone();
            let gc = &consistency.grad("betas")[t * dims..(t + 1) * dims];
            for (a, b) in g[..dims].iter_mut().zip(gc) {
                *a += w.consistency * b;
            }
            gradient.extend(g);
        }
        let chamfer: f64 = terms.iter().map(|t| t.chamfer).sum();
        let keypoint: f64 = terms.iter().map(|t| t.keypoint).sum();
        let losses = FitLosses {
            total: w.chamfer * chamfer + w.keypoint * keypoint + w.consistency * consistency.value,
            chamfer,
            keypoint,
            consistency: consistency.value,
        };
        Ok(Evaluation {
            losses,
            frame_losses: terms
                .iter()
                .map(|t| FrameLosses {
                    chamfer: t.chamfer,
                    keypoint: t.keypoint,
                })
                .collect(),
            gradient,
            selection: terms.into_iter().map(|t| t.selection).collect(),
        })
    }

    fn frame_terms(&self, params: &FitParams, t: usize) -> Result<FrameTerms> {
        let obs = &self.frames[t];
        let w = &self.cfg.weights;
        let beta = params.beta(t);
        let theta = params.theta(t);
        let camera = params.camera(t);
        let fwd = self.model.forward(&beta, &theta)?;

        // The silhouette term is skipped entirely when it carries no weight.
        let (chamfer_value, chamfer_grad, selection) = if w.chamfer != 0.0 {
            let projected = camera.project(&fwd.vertices);
            let grid = SamplingGrid::bounding(&projected, self.cfg.grid_cells);
            let kept = adaptive_sample_indices(&projected, &grid, self.cfg.per_cell);
            let sampled: Vec<Vector2<f64>> = kept.iter().map(|&i| projected[i]).collect();
            let (chamfer, assign) = chamfer_with_assignments(&obs.cloud.points, &sampled)?;
            let mut d_vert_px = vec![Vector2::zeros(); fwd.vertices.len()];
            for (g, &i) in chamfer.grad("cloud_b").chunks_exact(2).zip(&kept) {
                d_vert_px[i] += Vector2::new(g[0], g[1]) * w.chamfer;
            }
            let mut selection = kept;
            selection.extend(assign.a_to_b);
            selection.extend(assign.b_to_a);
            (chamfer.value, d_vert_px, selection)
        } else {
            (0.0, vec![Vector2::zeros(); fwd.vertices.len()], Vec::new())
        };

        let keypoints = camera.project(&fwd.joints);
        let kp = keypoint_loss(&keypoints, &obs.keypoints, &obs.visible)?;

        // Pixel-space gradients of the weighted frame loss.
        let d_joint_px: Vec<Vector2<f64>> = kp
            .grad("pred")
            .chunks_exact(2)
            .map(|g| Vector2::new(g[0], g[1]) * w.keypoint)
            .collect();

        let mut d_scale = 0.0;
        let mut d_trans = Vector2::zeros();
        let mut lift = |points: &[Vector3<f64>], grads: &[Vector2<f64>]| -> Vec<Vector3<f64>> {
            points
                .iter()
                .zip(grads)
                .map(|(p, g)| {
                    d_scale += g.x * p.x + g.y * p.y;
                    d_trans += g;
                    Vector3::new(g.x, g.y, 0.0) * camera.scale
                })
                .collect()
        };
        let d_vertices = lift(&fwd.vertices, &chamfer_grad);
        let d_joints = lift(&fwd.joints, &d_joint_px);
        let back = fwd.backward(self.model, &d_vertices, &d_joints);

        let mut gradient = back.beta;
        for r in &back.theta {
            gradient.extend_from_slice(r.as_slice());
        }
        gradient.extend([d_scale, d_trans.x, d_trans.y]);

        Ok(FrameTerms {
            chamfer: chamfer_value,
            keypoint: kp.value,
            gradient,
            selection,
        })
    }
}
