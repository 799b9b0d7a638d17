//! Body-shape biometrics: a capsule body model fitted to silhouettes and 2D
//! keypoints, an arc-margin embedding of the fitted shape, view-binned
//! feature sets, and gallery/probe evaluation on synthetic protocols.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod body;
pub mod cli;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fitter;
pub mod kdtree;
pub mod losses;
pub mod optim;
pub mod pipeline;
pub mod rotation;
pub mod silhouette;
pub mod synth;

pub use error::{Error, Result};
