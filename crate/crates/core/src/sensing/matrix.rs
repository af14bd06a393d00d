//! Binary sparse measurement matrices with constant column weight.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from;

/// An `m x n` 0/1 matrix with exactly `d` ones per column.
///
/// Stored column-wise: column `j` owns `rows[j*d .. (j+1)*d]`, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementMatrix {
    m: usize,
    n: usize,
    d: usize,
    seed: u64,
    rows: Vec<u32>,
}

impl MeasurementMatrix {
    /// Draws each column's row set uniformly without replacement, then repairs
    /// empty rows by moving a one out of the heaviest row.
    pub fn generate(m: usize, n: usize, d: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > m {
            return Err(Error::Parameter(format!(
                "column weight {d} must lie in 1..={m}"
            )));
        }
        if m > n {
            return Err(Error::Parameter(format!(
                "measurement count {m} exceeds block length {n}"
            )));
        }
        if m > u32::MAX as usize {
            return Err(Error::Parameter(format!("measurement count {m} too large")));
        }
        let mut rng = rng_from(seed);
        let mut rows = Vec::with_capacity(n * d);
        for _ in 0..n {
            let mut col: Vec<u32> = index::sample(&mut rng, m, d)
                .into_iter()
                .map(|r| r as u32)
                .collect();
            col.sort_unstable();
            rows.extend_from_slice(&col);
        }
        let mut matrix = MeasurementMatrix { m, n, d, seed, rows };
        matrix.repair_empty_rows(&mut rng);
        Ok(matrix)
    }

    fn repair_empty_rows(&mut self, rng: &mut impl Rng) {
        let mut weights = self.row_weights();
        // n*d >= m, so whenever a row is empty some other row holds at least two ones.
        while let Some(empty) = weights.iter().position(|&w| w == 0) {
            let heaviest = weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("m >= 1");
            let holders: Vec<usize> = (0..self.n)
                .filter(|&j| self.column(j).binary_search(&(heaviest as u32)).is_ok())
                .collect();
            let j = holders[rng.random_range(0..holders.len())];
            let col = &mut self.rows[j * self.d..(j + 1) * self.d];
            let slot = col.iter().position(|&r| r == heaviest as u32).expect("holder");
            col[slot] = empty as u32;
            col.sort_unstable();
            weights[heaviest] -= 1;
            weights[empty] += 1;
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column_weight(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sorted row indices of the ones in column `j`.
    pub fn column(&self, j: usize) -> &[u32] {
        &self.rows[j * self.d..(j + 1) * self.d]
    }

    pub fn row_weights(&self) -> Vec<usize> {
        let mut w = vec![0usize; self.m];
        for &r in &self.rows {
            w[r as usize] += 1;
        }
        w
    }

    /// `y = Φ x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                context: "measurement matrix input",
                expected: self.n,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.m];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (col, &xj) in self.rows.chunks_exact(self.d).zip(x) {
            if xj != 0.0 {
                for &r in col {
                    y[r as usize] += xj;
                }
            }
        }
    }

    /// `x = Φᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m {
            return Err(Error::Dimension {
                context: "measurement matrix adjoint input",
                expected: self.m,
                got: y.len(),
            });
        }
        let mut x = vec![0.0; self.n];
        self.apply_transpose_into(y, &mut x);
        Ok(x)
    }

    pub(crate) fn apply_transpose_into(&self, y: &[f64], x: &mut [f64]) {
        for (col, xj) in self.rows.chunks_exact(self.d).zip(x.iter_mut()) {
            *xj = col.iter().map(|&r| y[r as usize]).sum();
        }
    }

    /// `Φ Φᵀ`, whose entry `(i, k)` counts the columns containing both rows.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::<f64>::zeros(self.m, self.m);
        for col in self.rows.chunks_exact(self.d) {
            for &a in col {
                for &b in col {
                    g[(a as usize, b as usize)] += 1.0;
                }
            }
        }
        g
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::<f64>::zeros(self.m, self.n);
        for j in 0..self.n {
            for &r in self.column(j) {
                dense[(r as usize, j)] = 1.0;
            }
        }
        dense
    }

    /// Header of `m, n, d, seed` as u64 LE, then `n*d` u32 LE row indices.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for v in [self.m as u64, self.n as u64, self.d as u64, self.seed] {
            w.write_all(&v.to_le_bytes())?;
        }
        for r in &self.rows {
            w.write_all(&r.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |detail: String| Error::format("<measurement matrix>", detail);
        let mut header = [0u8; 32];
        r.read_exact(&mut header)
            .map_err(|e| bad(format!("short header: {e}")))?;
        let word = |i: usize| u64::from_le_bytes(header[i * 8..i * 8 + 8].try_into().unwrap());
        let (m, n, d, seed) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3));
        if d == 0 || d > m || m > n {
            return Err(bad(format!("inconsistent header m={m} n={n} d={d}")));
        }
        let mut buf = vec![0u8; n * d * 4];
        r.read_exact(&mut buf)
            .map_err(|e| bad(format!("short body: {e}")))?;
        let rows: Vec<u32> = buf
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let matrix = MeasurementMatrix { m, n, d, seed, rows };
        for j in 0..n {
            let col = matrix.column(j);
            if col.windows(2).any(|w| w[0] >= w[1]) || col.iter().any(|&x| x as usize >= m) {
                return Err(bad(format!("column {j} is not a sorted set of rows below {m}")));
            }
        }
        Ok(matrix)
    }
}
