//! Simplex crossover for equality-constrained basis pursuit.
//!
//! `min ‖s‖₁ s.t. A s = y` is the LP `min 1ᵀw s.t. [A, −A] w = y, w ≥ 0`.
//! A basis is a set of `m` signed columns of `A`. Starting from the largest
//! entries of an approximate solution, primal simplex pivots run until no
//! column has `|A_jᵀν| > 1`, which certifies the vertex as optimal.

use nalgebra::{DMatrix, DVector};

use super::operator::SensingChain;

/// Reduced-cost slack before a column may enter.
const ENTER_SLACK: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

/// Optimal coefficients, or `None` if the pivot limit is hit or the basis
/// cannot be formed.
pub(super) fn crossover(chain: &mut SensingChain<'_>, y: &[f64], start: &[f64], max_pivots: usize) -> Option<Vec<f64>> {
    let (m, n) = (chain.m(), chain.n());
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut col = vec![0.0; m];
    for j in 0..n {
        chain.column(j, &mut col);
        a.column_mut(j).copy_from_slice(&col);
    }
    let mut basis = initial_basis(&a, start)?;
    let y = DVector::from_column_slice(y);
    let mut signs: Option<Vec<f64>> = None;
    let mut degenerate = 0;

    for _ in 0..=max_pivots {
        let b = DMatrix::from_fn(m, m, |i, k| a[(i, basis[k])]);
        let lu_t = b.transpose().lu();
        let lu = b.lu();
        let x = lu.solve(&y)?;
        // The first basis takes the signs that make it feasible; afterwards
        // each column keeps the sign it entered with.
        let signs = signs.get_or_insert_with(|| x.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect());
        let xb: Vec<f64> = x.iter().zip(signs.iter()).map(|(v, s)| (v * s).max(0.0)).collect();
        // Bᵀν = c_B in the signed basis: (A_B diag(signs))ᵀ ν = 1.
        let nu = lu_t.solve(&DVector::from_column_slice(signs))?;
        let g = a.tr_mul(&nu);

        let in_basis = |j: usize| basis.contains(&j);
        let candidates = (0..n).filter(|&j| !in_basis(j) && g[j].abs() > 1.0 + ENTER_SLACK);
        let entering = if degenerate >= DEGENERATE_LIMIT {
            candidates.min()
        } else {
            candidates.max_by(|&p, &q| g[p].abs().total_cmp(&g[q].abs()).then(q.cmp(&p)))
        };
        let Some(q) = entering else {
            let mut s = vec![0.0; n];
            for ((&j, &sg), &v) in basis.iter().zip(signs.iter()).zip(&xb) {
                s[j] = sg * v;
            }
            return s.iter().all(|v| v.is_finite()).then_some(s);
        };
        let sq = g[q].signum();

        // Direction in signed basic coordinates.
        let dq = lu.solve(&(a.column(q) * sq))?;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let d = dq[i] * signs[i];
            if d > 1e-12 {
                let t = xb[i] / d;
                let better = match leave {
                    None => true,
                    Some((li, lt)) => t < lt - 1e-15 || (t <= lt + 1e-15 && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((i, t));
                }
            }
        }
        let (li, t) = leave?;
        degenerate = if t <= 1e-14 { degenerate + 1 } else { 0 };
        basis[li] = q;
        signs[li] = sq;
    }
    None
}

/// `m` linearly independent columns, taken first from the support of `start`.
fn initial_basis(a: &DMatrix<f64>, start: &[f64]) -> Option<Vec<usize>> {
    let (m, n) = a.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| start[q].abs().total_cmp(&start[p].abs()).then(p.cmp(&q)));
    let mut q_cols: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for j in order {
        let aj = a.column(j).into_owned();
        let norm = aj.norm();
        if norm == 0.0 {
            continue;
        }
        let mut r = aj;
        // Two passes of Gram-Schmidt keep the basis orthogonal to working precision.
        for _ in 0..2 {
            for qc in &q_cols {
                let c = qc.dot(&r);
                r.axpy(-c, qc, 1.0);
            }
        }
        let rn = r.norm();
        if rn > 1e-8 * norm {
            q_cols.push(r / rn);
            basis.push(j);
            if basis.len() == m {
                return Some(basis);
            }
        }
    }
    None
}
