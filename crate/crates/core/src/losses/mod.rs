//! Training losses with analytic gradients.

mod arcmargin;
mod chamfer;
mod consistency;
mod keypoint;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use arcmargin::{arc_margin_loss, ArcMarginConfig};
pub use chamfer::{chamfer, chamfer_fast, chamfer_with_assignments, ChamferAssignments};
pub use consistency::shape_consistency;
pub use keypoint::keypoint_loss;

/// A loss value and its gradients, keyed by parameter block. Arrays are
/// flattened row-major in the shape of the corresponding input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradients: BTreeMap<&'static str, Vec<f64>>,
}

impl LossValue {
    pub fn grad(&self, block: &str) -> &[f64] {
        self.gradients.get(block).map_or(&[], Vec::as_slice)
    }
}

/// Relative weights of the fitting terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub chamfer: f64,
    pub keypoint: f64,
    pub consistency: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            chamfer: 1.0,
            keypoint: 1.0,
            consistency: 0.1,
        }
    }
}
