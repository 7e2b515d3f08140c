//! Deterministic core of a cell instance segmentation pipeline: ground-truth
//! encoding, loss evaluation, watershed post-processing, tiling with spline
//! blending, oversampling plans, stain transforms and panoptic metrics.

pub mod assignment;
pub mod error;
pub mod grid;
pub mod gt;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod postprocess;
pub mod sampling;
pub mod stain;
pub mod tensor;
pub mod tiling;

pub use error::{Error, Result};
pub use grid::{Grid, LabelMap, MagProfile, Magnification, Mask, StructuringElement};
pub use tensor::Tensor;
