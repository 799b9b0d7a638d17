use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::LossValue;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArcMarginConfig {
    /// Logit scale `s`.
    pub scale: f64,
    /// Additive angular margin `m` in radians.
    pub margin: f64,
}

impl Default for ArcMarginConfig {
    fn default() -> Self {
        Self { scale: 30.0, margin: 0.5 }
    }
}

impl ArcMarginConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::Config(format!("arc-margin scale must be positive, got {}", self.scale)));
        }
        if !(0.0..PI / 2.0).contains(&self.margin) {
            return Err(Error::Config(format!("arc-margin margin must be in [0, π/2), got {}", self.margin)));
        }
        Ok(())
    }
}

const MIN_NORM: f64 = 1e-12;

/// Additive angular margin softmax loss for one sample.
///
/// `class_weights` holds one row per class. Gradient blocks are `embedding`
/// (length D) and `class_weights` (C×D, row-major).
pub fn arc_margin_loss(
    embedding: &[f64],
    class_weights: &[Vec<f64>],
    label: usize,
    cfg: &ArcMarginConfig,
) -> Result<LossValue> {
    cfg.validate()?;
    let classes = class_weights.len();
    if label >= classes {
        return Err(Error::Config(format!("label {label} out of range for {classes} classes")));
    }
    let dim = embedding.len();
    let e = DVector::from_column_slice(embedding);
    let e_norm = e.norm();
    if !(e_norm > MIN_NORM) {
        return Err(Error::ZeroNorm("embedding".into()));
    }
    let e_hat = &e / e_norm;

    let mut w_hat = Vec::with_capacity(classes);
    let mut w_norm = Vec::with_capacity(classes);
    for (c, row) in class_weights.iter().enumerate() {
        check_len("class weight row", dim, row.len())?;
        let w = DVector::from_column_slice(row);
        let n = w.norm();
        if !(n > MIN_NORM) {
            return Err(Error::ZeroNorm(format!("class weight row {c}")));
        }
        w_hat.push(w / n);
        w_norm.push(n);
    }
    let cos: Vec<f64> = w_hat.iter().map(|w| w.dot(&e_hat).clamp(-1.0, 1.0)).collect();

    let angle = cos[label].acos();
    let clamped = angle >= PI - cfg.margin;
    let target_angle = angle.min(PI - cfg.margin) + cfg.margin;
    let logits: Vec<f64> = cos
        .iter()
        .enumerate()
        .map(|(j, &c)| if j == label { cfg.scale * target_angle.cos() } else { cfg.scale * c })
        .collect();
    // value = ln Σ_j exp(z_j − z_y), shifted so the largest exponent is zero;
    // when the target logit dominates this is ln_1p of a tiny sum, which keeps
    // full relative precision near zero loss.
    let target = logits[label];
    let shift = logits.iter().map(|z| z - target).fold(0.0, f64::max);
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label)
        .map(|(_, z)| (z - target - shift).exp())
        .sum();
    let value = if shift == 0.0 {
        rest.ln_1p()
    } else {
        shift + ((-shift).exp() + rest).ln()
    };
    let log_z = target + value;

    // dL/dcos_j
    let d_cos: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let p = (z - log_z).exp();
            if j == label {
                let dz = if clamped {
                    0.0
                } else {
                    // d cos(θ+m) / d cos θ = sin(θ+m) / sin θ
                    cfg.scale * target_angle.sin() / angle.sin().max(MIN_NORM)
                };
                (p - 1.0) * dz
            } else {
                p * cfg.scale
            }
        })
        .collect();

    let mut grad_e = DVector::zeros(dim);
    let mut grad_w = Vec::with_capacity(classes * dim);
    for j in 0..classes {
        grad_e += (&w_hat[j] - &e_hat * cos[j]) * (d_cos[j] / e_norm);
        let gw = (&e_hat - &w_hat[j] * cos[j]) * (d_cos[j] / w_norm[j]);
        grad_w.extend(gw.iter());
    }
    Ok(LossValue {
        value,
        gradients: BTreeMap::from([("embedding", grad_e.iter().copied().collect()), ("class_weights", grad_w)]),
    })
}
