//! Basis pursuit in the DCT coefficient domain via ADMM.
//!
//! Solves `min ‖s‖₁  s.t. ‖Φ θᵀ s − y‖₂ ≤ ε` by splitting the l1 term from the
//! constraint set. The constraint step is an exact Euclidean projection, so
//! every constraint iterate is feasible.
//!
//! In the equality setting the optimum is a vertex of an LP. Every few
//! iterations the support picked out by the shrinkage step is polished by
//! least squares, and the ADMM dual is turned into a candidate certificate
//! `ν` with `(Aᵀν)_S = sign(s_S)`, `‖Aᵀν‖_∞ ≤ 1`. A passing certificate proves
//! optimality and ends the solve. If no certificate appears, a bounded
//! simplex crossover from the best iterate finishes the job.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};

use super::crossover::crossover;
use super::operator::{Projector, SensingChain};
use super::{Recovery, SolverConfig};
use crate::error::{Error, Result};
use crate::sensing::{DctOperator, MeasurementMatrix, MeasurementVector};

/// Largest `m * k²` for which a support polish is attempted.
const POLISH_FLOP_LIMIT: f64 = 2e9;
const POLISH_EVERY: usize = 25;
const REBALANCE_EVERY: usize = 10;
/// Slack on the dual sup-norm bound of a certificate.
const CERTIFICATE_SLACK: f64 = 1e-9;
/// Simplex crossover runs when `m⁴ · pivots-per-row` stays below this.
const CROSSOVER_FLOP_LIMIT: f64 = 2e10;
const CROSSOVER_PIVOTS_PER_ROW: f64 = 3.0;

pub fn basis_pursuit(
    matrix: &MeasurementMatrix,
    dct: &DctOperator,
    y: &MeasurementVector,
    cfg: &SolverConfig,
) -> Result<Recovery> {
    cfg.validate()?;
    if y.len() != matrix.m() {
        return Err(Error::Dimension {
            context: "measurement vector",
            expected: matrix.m(),
            got: y.len(),
        });
    }
    let mut chain = SensingChain::new(matrix, dct)?;
    let (m, n) = (chain.m(), chain.n());
    let y = &y.values;
    let y_norm = norm2(y);
    if y_norm == 0.0 {
        return Ok(Recovery {
            coefficients: vec![0.0; n],
            residual: 0.0,
            iterations_used: 0,
            converged: true,
        });
    }
    let eps = cfg.feasibility_tol.resolve(y_norm);
    let equality = SolverConfig::treat_as_equality(eps, y_norm);
    let projector = Projector::new(matrix, (!equality).then_some(eps))?;

    // Least-norm feasible start.
    let mut x = vec![0.0; n];
    projector.project(&mut chain, y, &vec![0.0; n], &mut x);
    check_finite(&x)?;
    let l1_start = norm1(&x);
    if l1_start == 0.0 {
        return Err(Error::Numerical("least-norm start vanished for nonzero y".into()));
    }
    let mut z = x.clone();
    let mut u = vec![0.0; n];
    let mut z_prev = vec![0.0; n];
    let mut v = vec![0.0; n];
    // Initial shrinkage threshold 1/ρ is the mean coefficient magnitude of the start.
    let mut rho = n as f64 / l1_start;

    let mut best = Candidate::new(x.clone(), l1_start);
    let mut prev_obj = l1_start;
    let mut converged = false;
    let mut iterations = 0;
    let tol = cfg.convergence_tol;
    let mut last_support: Vec<usize> = Vec::new();
    let polish_budget = |k: usize| m as f64 * (k as f64).powi(2) <= POLISH_FLOP_LIMIT;

    for it in 1..=cfg.max_iterations {
        iterations = it;
        for ((vi, zi), ui) in v.iter_mut().zip(&z).zip(&u) {
            *vi = zi - ui;
        }
        projector.project(&mut chain, y, &v, &mut x);
        z_prev.copy_from_slice(&z);
        let thresh = 1.0 / rho;
        for ((zi, xi), ui) in z.iter_mut().zip(&x).zip(&u) {
            *zi = soft(xi + ui, thresh);
        }
        let mut primal = 0.0;
        for ((ui, xi), zi) in u.iter_mut().zip(&x).zip(&z) {
            let d = xi - zi;
            *ui += d;
            primal += d * d;
        }
        let primal = primal.sqrt();
        let dual = rho * dist(&z, &z_prev);
        check_finite(&x)?;

        let obj = norm1(&x);
        best.offer(&x, obj);
        let rel_change = (obj - prev_obj).abs() / obj.max(f64::MIN_POSITIVE);
        prev_obj = obj;

        let scale = norm2(&x).max(norm2(&z));
        if rel_change < tol
            && primal <= tol * scale
            && dual <= tol * rho * norm2(&u).max(f64::MIN_POSITIVE)
        {
            converged = true;
            break;
        }

        if it % POLISH_EVERY == 0 {
            let support = leading_support(&z, m);
            let fresh = support != last_support;
            if fresh && !support.is_empty() && polish_budget(support.len()) {
                if let Some(p) = polish(&mut chain, y, &support, eps) {
                    best.offer(&p.coefficients, p.objective);
                    if equality && best.objective >= p.objective {
                        let dual_guess: Vec<f64> = u.iter().map(|ui| rho * ui).collect();
                        if certify(&mut chain, &projector, &p, &dual_guess) {
                            converged = true;
                            break;
                        }
                    }
                }
            }
            last_support = support;
        }

        if it % REBALANCE_EVERY == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u.iter_mut().for_each(|ui| *ui *= 0.5);
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u.iter_mut().for_each(|ui| *ui *= 2.0);
            }
        }
    }

    if !converged {
        let support = leading_support(&z, m);
        if !support.is_empty() && polish_budget(support.len()) {
            if let Some(p) = polish(&mut chain, y, &support, eps) {
                best.offer(&p.coefficients, p.objective);
            }
        }
        if equality && (m as f64).powi(4) * CROSSOVER_PIVOTS_PER_ROW <= CROSSOVER_FLOP_LIMIT {
            let pivots = (CROSSOVER_PIVOTS_PER_ROW * m as f64) as usize;
            if let Some(s) = crossover(&mut chain, y, &best.coefficients, pivots) {
                let obj = norm1(&s);
                if chain.residual_norm(&s, y) <= eps && obj <= best.objective + 1e-12 * obj {
                    best = Candidate::new(s, obj);
                    converged = true;
                }
            }
        }
    }

    let coefficients = best.coefficients;
    let residual = chain.residual_norm(&coefficients, y);
    Ok(Recovery {
        coefficients,
        residual,
        iterations_used: iterations,
        converged: converged && residual <= eps + 1e-9,
    })
}

/// Tracks the feasible point with the smallest l1 norm seen so far.
struct Candidate {
    coefficients: Vec<f64>,
    objective: f64,
}

impl Candidate {
    fn new(coefficients: Vec<f64>, objective: f64) -> Self {
        Candidate {
            coefficients,
            objective,
        }
    }

    fn offer(&mut self, s: &[f64], objective: f64) {
        if objective < self.objective {
            self.objective = objective;
            self.coefficients.copy_from_slice(s);
        }
    }
}

struct Polished {
    coefficients: Vec<f64>,
    objective: f64,
    support: Vec<usize>,
    /// Dense `A_S`, columns in `support` order.
    atoms: DMatrix<f64>,
    solver: SupportSolver,
}

/// Factorisation of `A_S`: Cholesky of `A_Sᵀ A_S` when it is well posed, SVD otherwise.
enum SupportSolver {
    Normal(Cholesky<f64, Dyn>),
    Svd(SVD<f64, Dyn, Dyn>),
}

impl SupportSolver {
    fn new(atoms: &DMatrix<f64>) -> Self {
        let gram = atoms.tr_mul(atoms);
        let diag_max = gram.diagonal().max();
        if let Some(chol) = Cholesky::new(gram) {
            // Reject factorisations whose pivots collapse; normal equations square the conditioning.
            let l = chol.l_dirty();
            let min_pivot = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
            if min_pivot * min_pivot > 1e-10 * diag_max {
                return SupportSolver::Normal(chol);
            }
        }
        SupportSolver::Svd(atoms.clone().svd(true, true))
    }

    /// Least-squares `argmin ‖A_S c − b‖`.
    fn least_squares(&self, atoms: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SupportSolver::Normal(chol) => Some(chol.solve(&atoms.tr_mul(b))),
            SupportSolver::Svd(svd) => {
                let tol = svd.singular_values.max() * 1e-12 * atoms.nrows().max(atoms.ncols()) as f64;
                svd.solve(b, tol).ok()
            }
        }
    }

    /// Minimum-norm `ν` with `A_Sᵀ ν = g`, or its least-squares stand-in.
    fn min_norm_transposed(&self, atoms: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SupportSolver::Normal(chol) => Some(atoms * chol.solve(g)),
            SupportSolver::Svd(svd) => {
                let u = svd.u.as_ref()?;
                let vt = svd.v_t.as_ref()?;
                let top = svd.singular_values.max();
                let tol = top * 1e-12 * atoms.nrows().max(atoms.ncols()) as f64;
                let w = vt * g;
                let scaled = DVector::from_iterator(
                    w.len(),
                    w.iter()
                        .zip(svd.singular_values.iter())
                        .map(|(wi, &s)| if s > tol { wi / s } else { 0.0 }),
                );
                Some(u * scaled)
            }
        }
    }
}

/// Nonzeros of the shrinkage iterate, trimmed to the `m` largest magnitudes.
fn leading_support(z: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0).collect();
    if idx.len() > m {
        idx.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
        idx.truncate(m);
        idx.sort_unstable();
    }
    idx
}

/// Least squares on a fixed support; kept only if it stays within `eps`.
fn polish(chain: &mut SensingChain<'_>, y: &[f64], support: &[usize], eps: f64) -> Option<Polished> {
    let m = chain.m();
    let k = support.len();
    let mut atoms = DMatrix::<f64>::zeros(m, k);
    let mut col = vec![0.0; m];
    for (c, &idx) in support.iter().enumerate() {
        chain.column(idx, &mut col);
        atoms.column_mut(c).copy_from_slice(&col);
    }
    let solver = SupportSolver::new(&atoms);
    let c = solver.least_squares(&atoms, &DVector::from_column_slice(y))?;
    let mut s = vec![0.0; chain.n()];
    for (&idx, &v) in support.iter().zip(c.iter()) {
        s[idx] = v;
    }
    if s.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let residual = chain.residual_norm(&s, y);
    if residual > eps + 1e-12 * norm2(y).max(1.0) {
        return None;
    }
    Some(Polished {
        objective: norm1(&s),
        coefficients: s,
        support: support.to_vec(),
        atoms,
        solver,
    })
}

/// Checks LP optimality of a polished point for `min ‖s‖₁ s.t. A s = y`.
///
/// Starts from the least-squares fit `ν₀` of the ADMM dual `g ≈ Aᵀν`, then
/// adds the minimum-norm correction enforcing `A_Sᵀν = sign(s_S)`.
fn certify(chain: &mut SensingChain<'_>, projector: &Projector, p: &Polished, dual_guess: &[f64]) -> bool {
    let (m, n) = (chain.m(), chain.n());
    if p.support.iter().any(|&i| p.coefficients[i] == 0.0) {
        return false;
    }
    let mut ag = vec![0.0; m];
    chain.apply(dual_guess, &mut ag);
    let Some(nu0) = projector.solve_gram(&DVector::from_vec(ag)) else {
        return false;
    };
    let signs = DVector::from_iterator(
        p.support.len(),
        p.support.iter().map(|&i| p.coefficients[i].signum()),
    );
    let gap = &signs - p.atoms.tr_mul(&nu0);
    let Some(correction) = p.solver.min_norm_transposed(&p.atoms, &gap) else {
        return false;
    };
    let nu = nu0 + correction;
    let mut atnu = vec![0.0; n];
    chain.adjoint(nu.as_slice(), &mut atnu);
    let on_support_ok = p
        .support
        .iter()
        .zip(signs.iter())
        .all(|(&i, &sg)| (atnu[i] - sg).abs() <= 1e-7);
    on_support_ok && atnu.iter().all(|v| v.abs() <= 1.0 + CERTIFICATE_SLACK)
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite iterate in basis pursuit".into()))
    }
}

pub(crate) fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
