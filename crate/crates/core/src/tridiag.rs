//! Tridiagonal matrices and the Thomas algorithm.

use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude are treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-14;

/// `sub[i]` sits at row `i + 1`, column `i`; `sup[i]` at row `i`, column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("diag", "empty matrix"));
        }
        for off in [&sub, &sup] {
            if off.len() != n - 1 {
                return Err(Error::ShapeMismatch {
                    expected: n - 1,
                    found: off.len(),
                });
            }
        }
        Ok(TridiagonalMatrix { sub, diag, sup })
    }

    pub fn identity(n: usize) -> Self {
        TridiagonalMatrix {
            sub: vec![0.0; n.saturating_sub(1)],
            diag: vec![1.0; n],
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Entry `(row, col)`; zero off the band.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if row == col + 1 {
            self.sub[col]
        } else if col == row + 1 {
            self.sup[row]
        } else {
            0.0
        }
    }

    /// `|a_jj| >= Σ_{i≠j} |a_ij|` for every column `j`.
    pub fn is_column_diagonally_dominant(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| {
            let mut off = 0.0;
            if j > 0 {
                off += self.sup[j - 1].abs();
            }
            if j + 1 < n {
                off += self.sub[j].abs();
            }
            self.diag[j].abs() >= off
        })
    }

    /// `|a_ii| >= Σ_{j≠i} |a_ij|` for every row `i`.
    pub fn is_row_diagonally_dominant(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            let mut off = 0.0;
            if i > 0 {
                off += self.sub[i - 1].abs();
            }
            if i + 1 < n {
                off += self.sup[i].abs();
            }
            self.diag[i].abs() >= off
        })
    }
}

/// Solve `m x = rhs` by forward elimination and back substitution.
pub fn thomas_solve(m: &TridiagonalMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    if rhs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];

    let mut pivot = m.diag[0];
    if !(pivot.abs() >= PIVOT_FLOOR) {
        return Err(Error::Singular { row: 0, pivot });
    }
    if n > 1 {
        c[0] = m.sup[0] / pivot;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = m.diag[i] - m.sub[i - 1] * c[i - 1];
        if !(pivot.abs() >= PIVOT_FLOOR) {
            return Err(Error::Singular { row: i, pivot });
        }
        if i + 1 < n {
            c[i] = m.sup[i] / pivot;
        }
        x[i] = (rhs[i] - m.sub[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
