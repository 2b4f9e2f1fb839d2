//! Tridiagonal matrices and the Thomas algorithm.

use crate::error::{Error, Result};

/// Pivots smaller than this, relative to the largest entry of their row,
/// are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// A square tridiagonal matrix stored by diagonals.
///
/// `lower[i]` multiplies `x[i - 1]` in row `i` (so `lower[0]` is unused and
/// kept at zero); `upper[i]` multiplies `x[i + 1]` (so `upper[n - 1]` is
/// unused).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty tridiagonal matrix".into()));
        }
        for len in [lower.len(), upper.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        let mut m = Tridiagonal { lower, diag, upper };
        m.lower[0] = 0.0;
        m.upper[n - 1] = 0.0;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Computes `self * x` into `out`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// True when every row satisfies `|diag| > |lower| + |upper|`.
    pub fn is_strictly_diagonally_dominant(&self) -> bool {
        (0..self.dim()).all(|i| self.diag[i].abs() > self.lower[i].abs() + self.upper[i].abs())
    }

    /// Forward elimination of the Thomas algorithm, reusable across many
    /// right-hand sides.
    pub fn factor(&self) -> Result<ThomasFactors> {
        let n = self.dim();
        let mut modified_upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = self.diag[i] - self.lower[i] * prev_upper;
            let row_max = self.diag[i]
                .abs()
                .max(self.lower[i].abs())
                .max(self.upper[i].abs());
            if !pivot.is_finite() || pivot.abs() <= PIVOT_TOLERANCE * row_max {
                return Err(Error::ZeroPivot { row: i });
            }
            inv_pivot[i] = 1.0 / pivot;
            modified_upper[i] = self.upper[i] * inv_pivot[i];
            prev_upper = modified_upper[i];
        }
        Ok(ThomasFactors {
            lower: self.lower.clone(),
            modified_upper,
            inv_pivot,
        })
    }

    /// Solves `self * x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.factor()?.solve_in_place(&mut x)?;
        Ok(x)
    }
}

/// LU factors of a tridiagonal matrix in Thomas form.
#[derive(Debug, Clone)]
pub struct ThomasFactors {
    lower: Vec<f64>,
    modified_upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ThomasFactors {
    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        let n = self.inv_pivot.len();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.modified_upper[i] * rhs[i + 1];
        }
        Ok(())
    }
}
