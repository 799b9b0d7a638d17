use std::collections::BTreeMap;

use nalgebra::Vector2;

use super::LossValue;
use crate::error::{check_len, Error, Result};

/// Mean squared pixel error over visible keypoints; gradient block `pred`.
pub fn keypoint_loss(pred: &[Vector2<f64>], gt: &[Vector2<f64>], visible: &[bool]) -> Result<LossValue> {
    check_len("ground-truth keypoints", pred.len(), gt.len())?;
    check_len("keypoint visibility", pred.len(), visible.len())?;
    let n_vis = visible.iter().filter(|&&v| v).count();
    if n_vis == 0 {
        return Err(Error::NoVisibleKeypoints);
    }
    let inv = 1.0 / n_vis as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; 2 * pred.len()];
    for (k, ((p, g), &vis)) in pred.iter().zip(gt).zip(visible).enumerate() {
        if !vis {
            continue;
        }
        let d = p - g;
        value += d.norm_squared();
        grad[2 * k] = 2.0 * d.x * inv;
        grad[2 * k + 1] = 2.0 * d.y * inv;
    }
    Ok(LossValue {
        value: value * inv,
        gradients: BTreeMap::from([("pred", grad)]),
    })
}
