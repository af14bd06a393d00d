//! Block sampling: binary sparse sensing matrices and the DCT sparsifying basis.

mod dct;
mod matrix;

pub use dct::DctOperator;
pub use matrix::MeasurementMatrix;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::BlockRef;
use crate::seed::rng_from;

/// Ones per column used by the pipeline unless configured otherwise.
pub const DEFAULT_COLUMN_WEIGHT: usize = 4;

/// Compressed measurements of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    pub matrix_seed: u64,
    pub block: Option<BlockRef>,
}

impl MeasurementVector {
    pub fn new(values: Vec<f64>, matrix_seed: u64, block: Option<BlockRef>) -> Self {
        MeasurementVector {
            values,
            matrix_seed,
            block,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Simulates acquisition `y = Φ x + e`, `e ~ N(0, noise_sigma²)`.
pub fn sample_block(
    block: &[f64],
    matrix: &MeasurementMatrix,
    noise_sigma: f64,
    noise_seed: u64,
    block_ref: Option<BlockRef>,
) -> Result<MeasurementVector> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    let mut y = matrix.apply(block)?;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma)
            .map_err(|e| Error::Parameter(format!("noise distribution: {e}")))?;
        let mut rng = rng_from(noise_seed);
        for v in y.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(MeasurementVector::new(y, matrix.seed(), block_ref))
}
