//! Uniform cell-centred grid on (0, 1) and piecewise-constant grid functions.

use crate::error::{Error, Result};

/// Cells `j = 0..=n` of width `dx = 1/(n+1)` covering (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least two cells (n >= 1)"));
        }
        Ok(Grid {
            n,
            dx: 1.0 / (n as f64 + 1.0),
        })
    }

    /// The cell-count parameter `n`; the grid has `n + 1` cells.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.n + 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Center of cell `j`, `(j + 1/2) dx`.
    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    /// Left face of cell `j` (`x_{j-1/2} = j dx`), valid for `j = 0..=n+1`.
    pub fn face(&self, j: usize) -> f64 {
        if j == self.n + 1 {
            1.0
        } else {
            j as f64 * self.dx
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells()).map(|j| self.center(j)).collect()
    }

    pub fn faces(&self) -> Vec<f64> {
        (0..=self.cells()).map(|j| self.face(j)).collect()
    }
}

/// One value per cell of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::ShapeMismatch {
                expected: grid.cells(),
                found: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid function value at cell {j}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.cells()],
        }
    }

    /// Skips the finiteness scan; callers guarantee the length.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cells());
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub(crate) fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch {
                expected: self.grid.cells(),
                found: other.grid.cells(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_interior_point() {
        let g = Grid::new(1).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.centers(), vec![0.25, 0.75]);
        assert_eq!(g.faces(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn three_interior_points() {
        let g = Grid::new(3).unwrap();
        assert_eq!(g.centers(), vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn resolution_512() {
        let g = Grid::new(512).unwrap();
        assert_eq!(g.cells(), 513);
        assert_eq!(g.dx(), 1.0 / 513.0);
        assert_eq!(g.face(0), 0.0);
        assert_eq!(g.face(513), 1.0);
    }

    #[test]
    fn zero_rejected() {
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn cells_cover_unit_interval() {
        for n in [1, 7, 100, 512, 4095] {
            let g = Grid::new(n).unwrap();
            let total: f64 = (0..g.cells()).map(|_| g.dx()).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let c = g.centers();
            for w in c.windows(2) {
                assert!(w[1] > w[0]);
                assert!((w[1] - w[0] - g.dx()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_function_validates() {
        let g = Grid::new(2).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 2]).is_err());
        assert!(GridFunction::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(GridFunction::new(g, vec![0.0, 1.0, 2.0]).is_ok());
    }
}
