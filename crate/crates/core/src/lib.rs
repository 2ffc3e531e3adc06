//! Implicit monotone finite-difference solver for degenerate nonlinear
//! diffusion `u_t = (k(x) G(u)_x)_x` on (0, 1) with zero-flux boundaries,
//! together with its vanishing-viscosity regularization, diagnostics for the
//! discrete estimates the scheme satisfies, and refinement/stability studies.

pub mod config;
pub mod convergence;
pub mod error;
pub mod implicit;
pub mod model;
pub mod properties;
pub mod tridiag;
pub mod viscous;

pub use error::{Error, Result};
pub use implicit::{back_step, jacobian, newton_step_solve, residual, run, run_observed, Snapshots, StepDiagnostics, Trajectory};
pub use model::{
    project_initial, CoefficientField, CoefficientSource, Grid, GridFunction, InitialData, NewtonTolerance, Nonlinearity,
    NonlinearityKind, Problem, ProblemDef, SolverConfig, TimeStep,
};
pub use tridiag::{thomas_solve, TridiagonalMatrix};
pub use viscous::{viscous_jacobian, viscous_residual, viscous_run, viscous_step_solve, ViscosityConfig};
