//! Problem description: nonlinearity, diffusion coefficient, grid, solver
//! settings and projection of initial data onto cell averages.

mod grid;
mod nonlinearity;
pub mod quadrature;

use std::fmt;
use std::sync::Arc;

pub use grid::{Grid, GridFunction};
pub use nonlinearity::{Nonlinearity, NonlinearityKind, VALIDATION_SAMPLES};

use crate::error::{Error, Result};
use quadrature::gauss5_mean;

/// Diffusion coefficient sampled at the `n + 2` cell faces;
/// `face_values[j]` is `k(j dx) = k_{j-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    face_values: Vec<f64>,
}

impl CoefficientField {
    pub fn constant(grid: &Grid, k: f64) -> Result<Self> {
        Self::from_face_values(grid, vec![k; grid.cells() + 1])
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Grid, k: F) -> Result<Self> {
        Self::from_face_values(grid, grid.faces().into_iter().map(k).collect())
    }

    pub fn from_face_values(grid: &Grid, face_values: Vec<f64>) -> Result<Self> {
        if face_values.len() != grid.cells() + 1 {
            return Err(Error::ShapeMismatch {
                expected: grid.cells() + 1,
                found: face_values.len(),
            });
        }
        if let Some((j, v)) = face_values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::invalid(
                "k",
                format!("face value {j} must be positive and finite, got {v}"),
            ));
        }
        Ok(CoefficientField { face_values })
    }

    pub fn face_values(&self) -> &[f64] {
        &self.face_values
    }

    /// `k_{j+1/2}`, the coefficient on the face between cells `j` and `j+1`.
    #[inline]
    pub fn right_of(&self, j: usize) -> f64 {
        self.face_values[j + 1]
    }

    pub fn cells(&self) -> usize {
        self.face_values.len() - 1
    }
}

/// Newton tolerance. `Relative(t)` resolves to `t · max(1, ‖prev‖∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NewtonTolerance {
    Relative(f64),
    Absolute(f64),
}

impl NewtonTolerance {
    pub fn resolve(&self, prev: &GridFunction) -> f64 {
        match *self {
            NewtonTolerance::Relative(t) => t * prev.max_abs().max(1.0),
            NewtonTolerance::Absolute(t) => t,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            NewtonTolerance::Relative(t) | NewtonTolerance::Absolute(t) => t,
        }
    }
}

/// How the time step is tied to the grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Fixed(f64),
    /// `dt = c · dx`.
    PerDx(f64),
    /// `dt = lambda · dx²`.
    MeshRatio(f64),
}

impl TimeStep {
    pub fn dt(&self, grid: &Grid) -> f64 {
        let dx = grid.dx();
        match *self {
            TimeStep::Fixed(dt) => dt,
            TimeStep::PerDx(c) => c * dx,
            TimeStep::MeshRatio(l) => l * dx * dx,
        }
    }
}

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    /// Mesh ratio `dt / dx²`.
    pub lambda: f64,
    pub newton_tol: NewtonTolerance,
    pub newton_max_iter: usize,
    /// Initial Newton damping factor in (0, 1].
    pub damping: f64,
}

impl SolverConfig {
    pub fn new(grid: &Grid, step: TimeStep) -> Result<Self> {
        let dt = step.dt(grid);
        let cfg = SolverConfig {
            dt,
            lambda: dt / (grid.dx() * grid.dx()),
            newton_tol: NewtonTolerance::Relative(DEFAULT_NEWTON_TOL),
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
            damping: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Absolute Newton tolerance `0.1 dx²`.
    pub fn coarse_tolerance(mut self, grid: &Grid) -> Self {
        self.newton_tol = NewtonTolerance::Absolute(0.1 * grid.dx() * grid.dx());
        self
    }

    pub fn with_newton_tol(mut self, tol: NewtonTolerance) -> Self {
        self.newton_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be positive, got {}", self.lambda),
            ));
        }
        let tol = self.newton_tol.value();
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::invalid("newton_tol", format!("must be positive, got {tol}")));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(
                "damping",
                format!("must lie in (0, 1], got {}", self.damping),
            ));
        }
        Ok(())
    }
}

/// Cell averages `(1/dx) ∫ u0` over each cell, by 5-point Gauss–Legendre.
pub fn project_initial<F: Fn(f64) -> f64>(u0: F, grid: &Grid) -> Result<GridFunction> {
    let values: Vec<f64> = (0..grid.cells())
        .map(|j| gauss5_mean(&u0, grid.face(j), grid.face(j + 1)))
        .collect();
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("initial data on cell {j}")));
    }
    GridFunction::new(*grid, values)
}

pub type SpatialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Diffusion coefficient independent of a particular grid.
#[derive(Clone)]
pub enum CoefficientSource {
    Constant(f64),
    Function(SpatialFn),
    FaceValues(Vec<f64>),
}

impl CoefficientSource {
    pub fn on(&self, grid: &Grid) -> Result<CoefficientField> {
        match self {
            CoefficientSource::Constant(k) => CoefficientField::constant(grid, *k),
            CoefficientSource::Function(f) => CoefficientField::from_fn(grid, |x| f(x)),
            CoefficientSource::FaceValues(v) => CoefficientField::from_face_values(grid, v.clone()),
        }
    }
}

impl fmt::Debug for CoefficientSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientSource::Constant(k) => write!(f, "Constant({k})"),
            CoefficientSource::Function(_) => write!(f, "Function(..)"),
            CoefficientSource::FaceValues(v) => write!(f, "FaceValues(len {})", v.len()),
        }
    }
}

/// Initial data independent of a particular grid.
#[derive(Clone)]
pub enum InitialData {
    Constant(f64),
    Function(SpatialFn),
    CellValues(Vec<f64>),
}

impl InitialData {
    /// `u0(x) = 2 sin(2πx)`.
    pub fn paper_sine() -> Self {
        InitialData::Function(Arc::new(|x| 2.0 * (2.0 * std::f64::consts::PI * x).sin()))
    }

    pub fn on(&self, grid: &Grid) -> Result<GridFunction> {
        match self {
            InitialData::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::NonFinite("constant initial data".into()));
                }
                Ok(GridFunction::constant(*grid, *c))
            }
            InitialData::Function(f) => project_initial(|x| f(x), grid),
            InitialData::CellValues(v) => GridFunction::new(*grid, v.clone()),
        }
    }
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Constant(c) => write!(f, "Constant({c})"),
            InitialData::Function(_) => write!(f, "Function(..)"),
            InitialData::CellValues(v) => write!(f, "CellValues(len {})", v.len()),
        }
    }
}

/// A grid-independent problem: can be instantiated at any resolution.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    pub model: Nonlinearity,
    pub k: CoefficientSource,
    pub u0: InitialData,
    pub time_step: TimeStep,
    pub newton_tol: NewtonTolerance,
}

impl ProblemDef {
    pub fn new(model: Nonlinearity, k: CoefficientSource, u0: InitialData, time_step: TimeStep) -> Self {
        ProblemDef {
            model,
            k,
            u0,
            time_step,
            newton_tol: NewtonTolerance::Relative(DEFAULT_NEWTON_TOL),
        }
    }

    /// Clipped quadratic `G`, `k ≡ 1`, `u0 = 2 sin(2πx)`, `dt = 0.01 dx`.
    pub fn paper_example() -> Self {
        Self::new(
            Nonlinearity::clipped_quadratic(),
            CoefficientSource::Constant(1.0),
            InitialData::paper_sine(),
            TimeStep::PerDx(0.01),
        )
    }

    /// Linear heat equation with the same data and time step as the example.
    pub fn heat() -> Self {
        Self::new(
            Nonlinearity::identity(),
            CoefficientSource::Constant(1.0),
            InitialData::paper_sine(),
            TimeStep::PerDx(0.01),
        )
    }

    pub fn instantiate(&self, n: usize) -> Result<(Problem, SolverConfig)> {
        let grid = Grid::new(n)?;
        let problem = Problem {
            grid,
            model: self.model.clone(),
            k: self.k.on(&grid)?,
            u0: self.u0.on(&grid)?,
        };
        let cfg = SolverConfig::new(&grid, self.time_step)?.with_newton_tol(self.newton_tol);
        Ok((problem, cfg))
    }

    /// [`ProblemDef::instantiate`] with explicit initial cell values.
    pub fn instantiate_with(&self, n: usize, u0: GridFunction) -> Result<(Problem, SolverConfig)> {
        let grid = Grid::new(n)?;
        if *u0.grid() != grid {
            return Err(Error::ShapeMismatch {
                expected: grid.cells(),
                found: u0.len(),
            });
        }
        let problem = Problem::new(self.model.clone(), self.k.on(&grid)?, u0)?;
        let cfg = SolverConfig::new(&grid, self.time_step)?.with_newton_tol(self.newton_tol);
        Ok((problem, cfg))
    }
}

/// A problem discretized on a grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub model: Nonlinearity,
    pub k: CoefficientField,
    pub u0: GridFunction,
}

impl Problem {
    pub fn new(model: Nonlinearity, k: CoefficientField, u0: GridFunction) -> Result<Self> {
        let grid = *u0.grid();
        if k.cells() != grid.cells() {
            return Err(Error::ShapeMismatch {
                expected: grid.cells() + 1,
                found: k.face_values().len(),
            });
        }
        Ok(Problem { grid, model, k, u0 })
    }

    pub fn with_initial(&self, u0: GridFunction) -> Result<Self> {
        Problem::new(self.model.clone(), self.k.clone(), u0)
    }
}
