//! Orthogonal matching pursuit over the same sensing chain, used as a
//! cross-check against basis pursuit.

use nalgebra::{DMatrix, DVector};

use super::bp::norm2;
use super::operator::SensingChain;
use super::Recovery;
use crate::error::{Error, Result};
use crate::sensing::{DctOperator, MeasurementMatrix, MeasurementVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmpStop {
    /// Select exactly this many atoms (fewer if the residual vanishes first).
    Sparsity(usize),
    /// Select atoms until `‖r‖₂ ≤ tol` or `m` atoms are in the support.
    Residual(f64),
}

pub fn omp(
    matrix: &MeasurementMatrix,
    dct: &DctOperator,
    y: &MeasurementVector,
    stop: OmpStop,
) -> Result<Recovery> {
    if y.len() != matrix.m() {
        return Err(Error::Dimension {
            context: "measurement vector",
            expected: matrix.m(),
            got: y.len(),
        });
    }
    let mut chain = SensingChain::new(matrix, dct)?;
    let (m, n) = (chain.m(), chain.n());
    let (max_atoms, res_tol) = match stop {
        OmpStop::Sparsity(k) if k > m => {
            return Err(Error::Parameter(format!("sparsity {k} exceeds measurement count {m}")));
        }
        OmpStop::Sparsity(k) => (k, 0.0),
        OmpStop::Residual(tol) if !(tol >= 0.0) => {
            return Err(Error::Parameter(format!("residual tolerance {tol} must be >= 0")));
        }
        OmpStop::Residual(tol) => (m, tol),
    };

    let y_vec = DVector::from_column_slice(&y.values);
    // Atoms are compared after normalisation; the binary matrix gives the DC atom a much larger norm.
    let mut col = vec![0.0; m];
    let norms: Vec<f64> = (0..n)
        .map(|j| {
            chain.column(j, &mut col);
            norm2(&col)
        })
        .collect();

    let mut support: Vec<usize> = Vec::new();
    let mut atoms = DMatrix::<f64>::zeros(m, 0);
    let mut coeffs = DVector::<f64>::zeros(0);
    let mut residual = y_vec.clone();
    let mut corr = vec![0.0; n];
    let floor = 1e-13 * y_vec.norm().max(1.0);

    while support.len() < max_atoms && residual.norm() > res_tol.max(floor) {
        chain.adjoint(residual.as_slice(), &mut corr);
        let pick = (0..n)
            .filter(|j| norms[*j] > 0.0 && !support.contains(j))
            .map(|j| (j, corr[j].abs() / norms[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((j, _)) = pick else { break };
        support.push(j);
        chain.column(j, &mut col);
        let last = atoms.ncols();
        atoms = atoms.insert_column(last, 0.0);
        atoms.column_mut(last).copy_from_slice(&col);
        let svd = atoms.clone().svd(true, true);
        coeffs = svd
            .solve(&y_vec, 1e-12 * svd.singular_values.max())
            .map_err(|e| Error::Numerical(format!("OMP least squares: {e}")))?;
        residual = &y_vec - &atoms * &coeffs;
    }

    let mut coefficients = vec![0.0; n];
    for (&j, &c) in support.iter().zip(coeffs.iter()) {
        coefficients[j] = c;
    }
    let residual_norm = chain.residual_norm(&coefficients, &y.values);
    let converged = match stop {
        OmpStop::Sparsity(k) => support.len() == k || residual_norm <= floor,
        OmpStop::Residual(tol) => residual_norm <= tol.max(floor),
    };
    Ok(Recovery {
        coefficients,
        residual: residual_norm,
        iterations_used: support.len(),
        converged,
    })
}
