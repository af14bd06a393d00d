//! Adaptive block-based compressed-sensing acquisition of FMCW scanning-radar frames.
//!
//! A polar frame is split into equal blocks; each block is sampled with a
//! binary sparse matrix and recovered by basis pursuit over an orthonormal 2D
//! DCT. How many measurements each block receives is decided by camera
//! detections (which azimuth sectors hold objects) and, optionally, by CFAR
//! hits in the previously reconstructed frame.
//!
//! Module map:
//! - [`frame`]: polar frames, block partition, region labels.
//! - [`sensing`]: measurement matrices, the DCT, block sampling.
//! - [`solver`]: basis pursuit and the OMP cross-check.
//! - [`guidance`]: camera geometry and CFAR detection.
//! - [`allocator`]: per-block sampling plans under a global budget.
//! - [`pipeline`]: scene IO, synthetic scenes, sequence runs, metrics.

pub mod allocator;
pub mod error;
pub mod frame;
pub mod guidance;
pub mod pipeline;
pub mod seed;
pub mod sensing;
pub mod solver;

pub use error::{Error, Result};
pub use frame::{BlockGrid, BlockRef, FrameMeta, PolarFrame, RegionLabel};
