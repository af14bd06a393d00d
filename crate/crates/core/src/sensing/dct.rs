//! Separable orthonormal 2D DCT-II over azimuth-major blocks.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Orthonormal DCT-II basis of length `n`, row `k` holding the `k`-th cosine.
fn dct_basis(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    let scale0 = (1.0 / n as f64).sqrt();
    let scale = (2.0 / n as f64).sqrt();
    for k in 0..n {
        let s = if k == 0 { scale0 } else { scale };
        for i in 0..n {
            c[k * n + i] = s * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

/// 2D DCT on a `rows x cols` block; forward is analysis, inverse is synthesis.
#[derive(Debug, Clone)]
pub struct DctOperator {
    rows: usize,
    cols: usize,
    basis_rows: Vec<f64>,
    basis_cols: Vec<f64>,
}

impl DctOperator {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Parameter(format!("DCT dims {rows}x{cols} must be positive")));
        }
        Ok(DctOperator {
            rows,
            cols,
            basis_rows: dct_basis(rows),
            basis_cols: dct_basis(cols),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Dimension {
                context: "DCT block",
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn forward(&self, block: &[f64]) -> Result<Vec<f64>> {
        self.check(block.len())?;
        let mut out = vec![0.0; self.len()];
        let mut scratch = vec![0.0; self.len()];
        self.forward_into(block, &mut out, &mut scratch);
        Ok(out)
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check(coeffs.len())?;
        let mut out = vec![0.0; self.len()];
        let mut scratch = vec![0.0; self.len()];
        self.inverse_into(coeffs, &mut out, &mut scratch);
        Ok(out)
    }

    /// `S = C_r X C_cᵀ`. All slices have length `rows * cols`.
    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let (r, c) = (self.rows, self.cols);
        // scratch = X C_cᵀ, one range row at a time.
        for i in 0..r {
            let xi = &x[i * c..(i + 1) * c];
            let ti = &mut scratch[i * c..(i + 1) * c];
            for (k, t) in ti.iter_mut().enumerate() {
                let basis = &self.basis_cols[k * c..(k + 1) * c];
                *t = dot(xi, basis);
            }
        }
        // out = C_r scratch
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..r {
            let ok = &mut out[k * c..(k + 1) * c];
            for i in 0..r {
                let w = self.basis_rows[k * r + i];
                axpy(w, &scratch[i * c..(i + 1) * c], ok);
            }
        }
    }

    /// `X = C_rᵀ S C_c`.
    pub(crate) fn inverse_into(&self, s: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let (r, c) = (self.rows, self.cols);
        // scratch = C_rᵀ S
        scratch.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..r {
            let sk = &s[k * c..(k + 1) * c];
            for i in 0..r {
                let w = self.basis_rows[k * r + i];
                axpy(w, sk, &mut scratch[i * c..(i + 1) * c]);
            }
        }
        // out = scratch C_c
        for i in 0..r {
            let ti = &scratch[i * c..(i + 1) * c];
            let oi = &mut out[i * c..(i + 1) * c];
            oi.iter_mut().for_each(|v| *v = 0.0);
            for (k, &t) in ti.iter().enumerate() {
                if t != 0.0 {
                    axpy(t, &self.basis_cols[k * c..(k + 1) * c], oi);
                }
            }
        }
    }

    /// Synthesis atom `θᵀ e_idx` written into `out`.
    pub(crate) fn atom_into(&self, idx: usize, out: &mut [f64]) {
        let (r, c) = (self.rows, self.cols);
        let (kr, kc) = (idx / c, idx % c);
        let br = &self.basis_rows[kr * r..(kr + 1) * r];
        let bc = &self.basis_cols[kc * c..(kc + 1) * c];
        for (i, &w) in br.iter().enumerate() {
            for (o, &b) in out[i * c..(i + 1) * c].iter_mut().zip(bc) {
                *o = w * b;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
