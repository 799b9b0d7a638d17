use super::{
    init_subsequence, mean_beta, median_view, FitConfig, FitParams, FrameFit, FrameObservation, LossRecord, Objective,
    SubsequenceFit,
};
use crate::body::{view_angles, BodyModel, Camera};
use crate::error::{Error, Result};
use crate::optim::Adam;

/// Smallest camera scale the optimizer may reach, in pixels per metre.
const MIN_SCALE: f64 = 1e-3;

/// Fits one subsequence by adaptive-moment descent on the weighted objective
/// and returns the iterate with the lowest total loss.
pub fn fit_subsequence(
    model: &BodyModel,
    frames: &[FrameObservation],
    cfg: &FitConfig,
    seed: u64,
) -> Result<SubsequenceFit> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::Empty("subsequence".into()));
    }
    for f in frames {
        f.check(model.keypoint_count())?;
    }
    let starts = init_subsequence(model, frames, cfg, seed)?;
    let mut params = FitParams::new(model, &starts);
    let objective = Objective { model, frames, cfg };
    let mut adam = Adam::new(cfg.adam, params.step_sizes(cfg));

    let mut history: Vec<LossRecord> = Vec::new();
    let mut best: Option<(FitParams, super::Evaluation)> = None;
    let mut converged = false;
    for iter in 0..cfg.max_iters {
        let eval = objective.evaluate(&params)?;
        let total = eval.losses.total;
        if !total.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration: iter });
        }
        history.push(LossRecord {
            iter,
            losses: eval.losses,
        });
        if best.as_ref().is_none_or(|(_, b)| total < b.losses.total) {
            best = Some((params.clone(), eval.clone()));
        }
        if iter >= cfg.window {
            let before = history[iter - cfg.window].losses.total;
            if (before - total).abs() <= cfg.rel_tol * before.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if iter + 1 == cfg.max_iters {
            break;
        }
        adam.step(&mut params.values, &eval.gradient, 1.0)?;
        params.clamp_betas(cfg.beta_bound);
        let n = params.frame_len();
        for frame in params.values.chunks_exact_mut(n) {
            frame[n - 3] = frame[n - 3].max(MIN_SCALE);
        }
    }

    let (params, eval) = best.expect("at least one iteration runs");
    let frame_fits: Vec<FrameFit> = (0..frames.len())
        .map(|t| {
            let theta = params.theta(t);
            let c = params.camera(t);
            FrameFit {
                beta: params.beta(t),
                view: view_angles(&theta).0,
                theta,
                camera: Camera::new(c.scale, c.trans.x, c.trans.y).expect("scale kept positive"),
                losses: eval.frame_losses[t],
            }
        })
        .collect();
    let views: Vec<_> = frame_fits.iter().map(|f| f.view).collect();
    Ok(SubsequenceFit {
        feature: mean_beta(&frame_fits),
        median_view: median_view(&views),
        losses: eval.losses,
        iterations: history.len(),
        converged,
        history,
        frames: frame_fits,
    })
}
