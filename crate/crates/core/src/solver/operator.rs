use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sensing::{DctOperator, MeasurementMatrix};

/// The composed sensing chain `A = Φ θᵀ`, applied matrix-free.
pub(crate) struct SensingChain<'a> {
    pub matrix: &'a MeasurementMatrix,
    pub dct: &'a DctOperator,
    block: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> SensingChain<'a> {
    pub fn new(matrix: &'a MeasurementMatrix, dct: &'a DctOperator) -> Result<Self> {
        if matrix.n() != dct.len() {
            return Err(Error::Dimension {
                context: "sensing matrix vs DCT block",
                expected: dct.len(),
                got: matrix.n(),
            });
        }
        let n = dct.len();
        Ok(SensingChain {
            matrix,
            dct,
            block: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    pub fn m(&self) -> usize {
        self.matrix.m()
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// `out = Φ θᵀ s`
    pub fn apply(&mut self, s: &[f64], out: &mut [f64]) {
        self.dct.inverse_into(s, &mut self.block, &mut self.scratch);
        self.matrix.apply_into(&self.block, out);
    }

    /// `out = θ Φᵀ r`
    pub fn adjoint(&mut self, r: &[f64], out: &mut [f64]) {
        self.matrix.apply_transpose_into(r, &mut self.block);
        self.dct.forward_into(&self.block, out, &mut self.scratch);
    }

    /// Dense column `A e_idx`.
    pub fn column(&mut self, idx: usize, out: &mut [f64]) {
        self.dct.atom_into(idx, &mut self.block);
        self.matrix.apply_into(&self.block, out);
    }

    pub fn residual_norm(&mut self, s: &[f64], y: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.m()];
        self.apply(s, &mut ax);
        ax.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Euclidean projection onto `{s : ‖A s − y‖₂ ≤ ε}`.
///
/// `A Aᵀ = Φ Φᵀ` because θ is orthonormal, so only the small `m x m` Gram
/// matrix of the binary sensing matrix is ever factorised.
pub(crate) enum Projector {
    /// ε treated as zero: projection onto the affine set `A s = y`.
    Affine { chol: Cholesky<f64, Dyn> },
    /// Same as `Affine` for a rank-deficient Gram matrix (pseudo-inverse).
    AffinePinv { eig: SymmetricEigen<f64, Dyn>, floor: f64 },
    Ball {
        eig: SymmetricEigen<f64, Dyn>,
        floor: f64,
        eps: f64,
    },
}

impl Projector {
    pub fn new(matrix: &MeasurementMatrix, eps: Option<f64>) -> Result<Self> {
        let gram = matrix.gram();
        match eps {
            None => match Cholesky::new(gram.clone()) {
                Some(chol) => Ok(Projector::Affine { chol }),
                None => {
                    log::debug!("Gram matrix not positive definite, using pseudo-inverse");
                    let (eig, floor) = eigen(gram)?;
                    Ok(Projector::AffinePinv { eig, floor })
                }
            },
            Some(eps) => {
                let (eig, floor) = eigen(gram)?;
                Ok(Projector::Ball { eig, floor, eps })
            }
        }
    }

    /// `(Φ Φᵀ)⁻¹ b` for the equality projectors; `None` for the ball.
    pub fn solve_gram(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Projector::Affine { chol } => Some(chol.solve(b)),
            Projector::AffinePinv { eig, floor } => Some(pinv_apply(eig, *floor, b)),
            Projector::Ball { .. } => None,
        }
    }

    /// Projects `v` into `out`. `y` is the measurement vector.
    pub fn project(&self, chain: &mut SensingChain<'_>, y: &[f64], v: &[f64], out: &mut [f64]) {
        let m = chain.m();
        let mut av = vec![0.0; m];
        chain.apply(v, &mut av);
        let b = DVector::from_iterator(m, av.iter().zip(y).map(|(a, yi)| a - yi));
        let w = match self {
            Projector::Affine { chol } => chol.solve(&b),
            Projector::AffinePinv { eig, floor } => pinv_apply(eig, *floor, &b),
            Projector::Ball { eig, floor, eps } => {
                if b.norm() <= *eps {
                    out.copy_from_slice(v);
                    return;
                }
                let bh = eig.eigenvectors.tr_mul(&b);
                let lambda = ball_multiplier(&bh, &eig.eigenvalues, *floor, *eps);
                let c = DVector::from_iterator(
                    m,
                    bh.iter().zip(eig.eigenvalues.iter()).map(|(bi, &s)| {
                        if s <= *floor {
                            0.0
                        } else if lambda.is_infinite() {
                            bi / s
                        } else {
                            lambda * bi / (1.0 + lambda * s)
                        }
                    }),
                );
                &eig.eigenvectors * c
            }
        };
        let mut atw = vec![0.0; chain.n()];
        chain.adjoint(w.as_slice(), &mut atw);
        for ((o, vi), a) in out.iter_mut().zip(v).zip(&atw) {
            *o = vi - a;
        }
    }
}

fn pinv_apply(eig: &SymmetricEigen<f64, Dyn>, floor: f64, b: &DVector<f64>) -> DVector<f64> {
    let bh = eig.eigenvectors.tr_mul(b);
    let c = DVector::from_iterator(
        b.len(),
        bh.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(bi, &s)| if s > floor { bi / s } else { 0.0 }),
    );
    &eig.eigenvectors * c
}

fn eigen(gram: DMatrix<f64>) -> Result<(SymmetricEigen<f64, Dyn>, f64)> {
    let eig = SymmetricEigen::new(gram);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigen-decomposition of Gram matrix failed".into()));
    }
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = top * 1e-12 * eig.eigenvalues.len() as f64;
    Ok((eig, floor))
}

/// Solves `Σ (b̂ᵢ / (1 + λ σᵢ))² = ε²` for `λ ≥ 0`.
///
/// Returns `∞` when even the exact affine projection leaves a residual ≥ ε
/// (components in the null space of the Gram matrix cannot be reduced).
fn ball_multiplier(bh: &DVector<f64>, sigma: &DVector<f64>, floor: f64, eps: f64) -> f64 {
    let residual = |lambda: f64| -> f64 {
        bh.iter()
            .zip(sigma.iter())
            .map(|(b, &s)| {
                let r = if s <= floor { *b } else { b / (1.0 + lambda * s) };
                r * r
            })
            .sum::<f64>()
    };
    let target = eps * eps;
    if residual(f64::INFINITY) >= target {
        return f64::INFINITY;
    }
    let mut hi = 1.0;
    while residual(hi) > target {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    // hi keeps the residual at or below ε.
    hi
}
