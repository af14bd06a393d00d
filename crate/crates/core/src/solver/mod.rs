//! Block recovery: basis pursuit (primary) and orthogonal matching pursuit (oracle).

mod bp;
mod crossover;
mod omp;
mod operator;

pub use bp::basis_pursuit;
pub use omp::{omp, OmpStop};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::{DctOperator, MeasurementMatrix, MeasurementVector};

/// Relative tolerance at or below which the constraint is handled as `A s = y`.
pub const EQUALITY_RELATIVE_TOL: f64 = 1e-6;

/// Allowed constraint residual `ε` in `‖A s − y‖₂ ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeasibilityTol {
    /// `ε = c · ‖y‖₂`
    Relative(f64),
    Absolute(f64),
}

impl FeasibilityTol {
    pub fn resolve(self, y_norm: f64) -> f64 {
        match self {
            FeasibilityTol::Relative(c) => c * y_norm,
            FeasibilityTol::Absolute(eps) => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feasibility_tol: FeasibilityTol,
    pub max_iterations: usize,
    pub convergence_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: FeasibilityTol::Relative(EQUALITY_RELATIVE_TOL),
            max_iterations: 2000,
            convergence_tol: 1e-7,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let eps = match self.feasibility_tol {
            FeasibilityTol::Relative(v) | FeasibilityTol::Absolute(v) => v,
        };
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Parameter(format!("feasibility tolerance {eps} must be >= 0")));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be positive".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::Parameter(format!(
                "convergence tolerance {} must be positive",
                self.convergence_tol
            )));
        }
        Ok(())
    }

    pub(crate) fn treat_as_equality(eps: f64, y_norm: f64) -> bool {
        eps <= EQUALITY_RELATIVE_TOL * y_norm * (1.0 + 1e-12)
    }
}

/// Output of a sparse recovery in the DCT coefficient domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub coefficients: Vec<f64>,
    /// `‖Φ θᵀ s − y‖₂` of the returned coefficients.
    pub residual: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Basis pursuit followed by DCT synthesis.
pub fn reconstruct_block(
    matrix: &MeasurementMatrix,
    dct: &DctOperator,
    y: &MeasurementVector,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    recover_block(matrix, dct, y, cfg).map(|(block, _)| block)
}

/// Like [`reconstruct_block`] but also hands back the solver diagnostics.
pub fn recover_block(
    matrix: &MeasurementMatrix,
    dct: &DctOperator,
    y: &MeasurementVector,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Recovery)> {
    let recovery = basis_pursuit(matrix, dct, y, cfg)?;
    let block = dct.inverse(&recovery.coefficients)?;
    Ok((block, recovery))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::sample_block;

    #[test]
    fn zero_measurements_give_zero() {
        let dct = DctOperator::new(10, 20).unwrap();
        let mx = MeasurementMatrix::generate(20, 200, 4, 1).unwrap();
        let y = MeasurementVector::new(vec![0.0; 20], 1, None);
        let rec = basis_pursuit(&mx, &dct, &y, &SolverConfig::default()).unwrap();
        assert!(rec.coefficients.iter().all(|&c| c == 0.0));
        assert_eq!(rec.residual, 0.0);
        assert!(rec.converged);
        let block = reconstruct_block(&mx, &dct, &y, &SolverConfig::default()).unwrap();
        assert!(block.iter().all(|&v| v == 0.0));
        let o = omp(&mx, &dct, &y, OmpStop::Sparsity(5)).unwrap();
        assert!(o.coefficients.iter().all(|&c| c == 0.0));
        assert_eq!(o.iterations_used, 0);
    }

    #[test]
    fn dimension_errors() {
        let dct = DctOperator::new(10, 20).unwrap();
        let mx = MeasurementMatrix::generate(20, 200, 4, 1).unwrap();
        let short = MeasurementVector::new(vec![1.0; 19], 1, None);
        assert!(matches!(
            basis_pursuit(&mx, &dct, &short, &SolverConfig::default()),
            Err(Error::Dimension { .. })
        ));
        let wrong_dct = DctOperator::new(10, 10).unwrap();
        let y = MeasurementVector::new(vec![1.0; 20], 1, None);
        assert!(matches!(
            basis_pursuit(&mx, &wrong_dct, &y, &SolverConfig::default()),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            omp(&mx, &dct, &y, OmpStop::Sparsity(21)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn dc_block_from_two_percent() {
        let dct = DctOperator::new(20, 25).unwrap();
        let block = vec![3.0; 500];
        let mx = MeasurementMatrix::generate(10, 500, 4, 4).unwrap();
        let y = sample_block(&block, &mx, 0.0, 0, None).unwrap();
        let rec = reconstruct_block(&mx, &dct, &y, &SolverConfig::default()).unwrap();
        for v in rec {
            assert!((v - 3.0).abs() / 3.0 < 0.01, "{v}");
        }
    }

    #[test]
    fn ball_constraint_is_respected_and_cheaper() {
        let dct = DctOperator::new(10, 20).unwrap();
        let mx = MeasurementMatrix::generate(60, 200, 4, 9).unwrap();
        let block: Vec<f64> = (0..200).map(|i| 1.0 + ((i * 7) % 13) as f64 * 0.1).collect();
        let y = sample_block(&block, &mx, 0.05, 3, None).unwrap();
        let exact = basis_pursuit(&mx, &dct, &y, &SolverConfig::default()).unwrap();
        let eps = 0.05 * (60f64).sqrt();
        let cfg = SolverConfig {
            feasibility_tol: FeasibilityTol::Absolute(eps),
            ..SolverConfig::default()
        };
        let relaxed = basis_pursuit(&mx, &dct, &y, &cfg).unwrap();
        assert!(relaxed.residual <= eps + 1e-9);
        let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        assert!(l1(&relaxed.coefficients) <= l1(&exact.coefficients) + 1e-9);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            feasibility_tol: FeasibilityTol::Absolute(-1.0),
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
