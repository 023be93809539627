//! Discontinuity-aware Gaussian splatting.
//!
//! Every splat carries `M` cubic Bézier curves that scissor away part of its
//! footprint. Rendering multiplies each splat's blend weight by a binary
//! indicator computed from the implicit form of those curves; the backward
//! pass approximates the indicator's derivative with respect to the curve
//! control points by interpolating toward the nearest control-point value that
//! would flip the indicator at each pixel.

pub mod bezier;
pub mod check;
pub mod error;
pub mod fit;
pub mod grad;
pub mod io;
pub mod math;
pub mod projection;
pub mod raster;
pub mod scene;

pub use error::{Error, Result};
