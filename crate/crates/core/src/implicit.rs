//! The implicit conservative scheme
//!
//! ```text
//! u^{n+1}_j - λ [φ_{j+1/2}(u^{n+1}) - φ_{j-1/2}(u^{n+1})] = u^n_j,   j = 0..=N
//! φ_{j+1/2}(u) = k_{j+1/2} (G(u_{j+1}) - G(u_j)),   φ_{-1/2} = φ_{N+1/2} = 0
//! ```
//!
//! solved per step by damped Newton iteration with a tridiagonal Jacobian.
//! The zero boundary fluxes realize `Δ₋u_0 = Δ₊u_N = 0` at level `n + 1`.

use crate::error::{Error, Result};
use crate::model::{CoefficientField, Grid, GridFunction, Nonlinearity, Problem, SolverConfig};
use crate::tridiag::{thomas_solve, TridiagonalMatrix};

/// Smallest damping factor tried before a step is accepted without decrease.
pub const MIN_DAMPING: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub newton_iters: usize,
    pub final_residual_norm: f64,
    /// Resolved absolute tolerance the residual was tested against.
    pub tolerance: f64,
    pub damping_used: bool,
}

/// Discrete operator of one implicit step; `mu > 0` adds the viscous flux
/// `mu (u_{j+1} - u_j)` on every interior face.
#[derive(Clone, Copy)]
pub(crate) struct Stencil<'a> {
    pub lambda: f64,
    pub k: &'a CoefficientField,
    pub model: &'a Nonlinearity,
    pub mu: f64,
}

impl<'a> Stencil<'a> {
    pub fn new(lambda: f64, k: &'a CoefficientField, model: &'a Nonlinearity, mu: f64) -> Self {
        Stencil { lambda, k, model, mu }
    }

    fn check(&self, cells: usize) -> Result<()> {
        if self.k.cells() != cells {
            return Err(Error::ShapeMismatch {
                expected: cells + 1,
                found: self.k.face_values().len(),
            });
        }
        Ok(())
    }

    /// Interior face fluxes `φ_{j+1/2}`, `j = 0..N-1`.
    pub fn fluxes(&self, u: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = u.iter().map(|&v| self.model.eval(v)).collect();
        let mut flux: Vec<f64> = (0..u.len() - 1)
            .map(|j| self.k.right_of(j) * (g[j + 1] - g[j]))
            .collect();
        if self.mu != 0.0 {
            for (j, f) in flux.iter_mut().enumerate() {
                *f += self.mu * (u[j + 1] - u[j]);
            }
        }
        flux
    }

    /// `λ (φ_{j+1/2} - φ_{j-1/2})` per cell.
    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        let flux = self.fluxes(u);
        let n = u.len();
        (0..n)
            .map(|j| {
                let right = if j + 1 < n { flux[j] } else { 0.0 };
                let left = if j > 0 { flux[j - 1] } else { 0.0 };
                self.lambda * (right - left)
            })
            .collect()
    }

    pub fn residual(&self, u: &[f64], prev: &[f64]) -> Vec<f64> {
        let div = self.divergence(u);
        u.iter()
            .zip(prev)
            .zip(div)
            .map(|((&a, &b), d)| a - d - b)
            .collect()
    }

    pub fn jacobian(&self, u: &[f64]) -> TridiagonalMatrix {
        let n = u.len();
        let dg: Vec<f64> = u.iter().map(|&v| self.model.deriv(v)).collect();
        let mut diag = vec![1.0; n];
        let mut sub = vec![0.0; n - 1];
        let mut sup = vec![0.0; n - 1];
        let lm = self.lambda * self.mu;
        // face j+1/2 couples cells j and j+1
        for j in 0..n - 1 {
            let lk = self.lambda * self.k.right_of(j);
            sup[j] = -lk * dg[j + 1];
            sub[j] = -lk * dg[j];
            diag[j] += lk * dg[j];
            diag[j + 1] += lk * dg[j + 1];
            if self.mu != 0.0 {
                sup[j] -= lm;
                sub[j] -= lm;
                diag[j] += lm;
                diag[j + 1] += lm;
            }
        }
        TridiagonalMatrix { sub, diag, sup }
    }

    /// Damped Newton solve of one implicit step starting from `prev`.
    pub fn solve(&self, prev: &GridFunction, cfg: &SolverConfig) -> Result<(GridFunction, StepDiagnostics)> {
        let grid = *prev.grid();
        self.check(grid.cells())?;
        let tol = cfg.newton_tol.resolve(prev);
        let p = prev.values();
        let mut u = p.to_vec();
        let mut f = self.residual(&u, p);
        let mut norm = inf_norm(&f);
        let mut damping_used = false;

        for iter in 1..=cfg.newton_max_iter {
            let jac = self.jacobian(&u);
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = thomas_solve(&jac, &rhs)?;

            let mut theta = cfg.damping;
            let (trial, trial_f, trial_norm) = loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + theta * d).collect();
                let tf = self.residual(&trial, p);
                let tn = inf_norm(&tf);
                let sufficient = tn <= tol || tn <= (1.0 - 1e-4 * theta) * norm;
                if sufficient || theta * 0.5 < MIN_DAMPING {
                    break (trial, tf, tn);
                }
                theta *= 0.5;
                damping_used = true;
            };
            if !trial_norm.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: iter,
                    residual: trial_norm,
                    last_iterate: u,
                });
            }
            u = trial;
            f = trial_f;
            norm = trial_norm;
            if norm <= tol {
                return Ok((
                    GridFunction::from_raw(grid, u),
                    StepDiagnostics {
                        newton_iters: iter,
                        final_residual_norm: norm,
                        tolerance: tol,
                        damping_used,
                    },
                ));
            }
        }
        Err(Error::NonConvergence {
            iterations: cfg.newton_max_iter,
            residual: norm,
            last_iterate: u,
        })
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn check_pair(u: &GridFunction, prev: &GridFunction) -> Result<()> {
    u.same_grid(prev)
}

/// Residual of the implicit scheme at `u` given the previous state.
pub fn residual(
    u: &GridFunction,
    prev: &GridFunction,
    lambda: f64,
    k: &CoefficientField,
    model: &Nonlinearity,
) -> Result<Vec<f64>> {
    check_pair(u, prev)?;
    let s = Stencil::new(lambda, k, model, 0.0);
    s.check(u.len())?;
    Ok(s.residual(u.values(), prev.values()))
}

/// Exact Jacobian of [`residual`] with respect to `u`.
pub fn jacobian(u: &GridFunction, lambda: f64, k: &CoefficientField, model: &Nonlinearity) -> Result<TridiagonalMatrix> {
    let s = Stencil::new(lambda, k, model, 0.0);
    s.check(u.len())?;
    Ok(s.jacobian(u.values()))
}

/// Advance one step from `prev`.
///
/// At least one Newton update is always taken, so a converged step reports
/// `newton_iters >= 1`.
pub fn newton_step_solve(
    prev: &GridFunction,
    cfg: &SolverConfig,
    k: &CoefficientField,
    model: &Nonlinearity,
) -> Result<(GridFunction, StepDiagnostics)> {
    Stencil::new(cfg.lambda, k, model, 0.0).solve(prev, cfg)
}

/// Explicit step backwards in time: `u^{-1} = u^0 - λ Δ₊(k Δ₋ G(u^0))`.
pub fn back_step(u0: &GridFunction, cfg: &SolverConfig, k: &CoefficientField, model: &Nonlinearity) -> Result<GridFunction> {
    let s = Stencil::new(cfg.lambda, k, model, 0.0);
    s.check(u0.len())?;
    let div = s.divergence(u0.values());
    let values = u0.values().iter().zip(div).map(|(a, d)| a - d).collect();
    GridFunction::new(*u0.grid(), values)
}

/// Which states a run keeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshots {
    EveryStep,
    /// Keep the state at the last step boundary at or before each time.
    Times(Vec<f64>),
}

/// States `u^n` at recorded step indices, with per-step diagnostics for
/// every step taken.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub dt: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Step index of each stored state.
    pub steps: Vec<usize>,
    /// `t_n = n dt` for each stored state.
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    /// One entry per step taken, in order.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    /// A trajectory holding every step from a list of consecutive states.
    pub fn from_states(states: Vec<GridFunction>, dt: f64, lambda: f64, mu: f64) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::invalid("states", "trajectory needs at least one state"))?;
        let grid = *first.grid();
        for s in &states {
            first.same_grid(s)?;
        }
        let steps: Vec<usize> = (0..states.len()).collect();
        Ok(Trajectory {
            grid,
            dt,
            lambda,
            mu,
            times: steps.iter().map(|&n| n as f64 * dt).collect(),
            steps,
            states,
            diagnostics: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &GridFunction {
        &self.states[0]
    }

    pub fn last(&self) -> &GridFunction {
        self.states.last().expect("trajectory is never empty")
    }

    /// True when stored states are consecutive steps.
    pub fn is_every_step(&self) -> bool {
        self.steps.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// State stored for the given step, if any.
    pub fn at_step(&self, step: usize) -> Option<&GridFunction> {
        self.steps.binary_search(&step).ok().map(|i| &self.states[i])
    }
}

/// Number of whole steps of length `dt` that fit in `t` (left-closed
/// convention: the state on `[t_n, t_{n+1})` is `u^n`).
pub fn steps_until(t: f64, dt: f64) -> usize {
    let r = t / dt;
    (r + 1e-9 * r.max(1.0)).floor().max(0.0) as usize
}

pub(crate) fn run_stencil<F>(
    stencil: Stencil<'_>,
    u0: &GridFunction,
    cfg: &SolverConfig,
    t_end: f64,
    snapshots: &Snapshots,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &GridFunction, Option<&StepDiagnostics>),
{
    cfg.validate()?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid("t_end", format!("must be positive, got {t_end}")));
    }
    let total = steps_until(t_end, cfg.dt);
    let mut wanted: Vec<usize> = match snapshots {
        Snapshots::EveryStep => Vec::new(),
        Snapshots::Times(ts) => {
            let mut w = Vec::with_capacity(ts.len());
            for &t in ts {
                if !(t.is_finite() && t >= 0.0 && t <= t_end * (1.0 + 1e-12)) {
                    return Err(Error::invalid(
                        "snapshot_times",
                        format!("{t} is outside [0, {t_end}]"),
                    ));
                }
                w.push(steps_until(t, cfg.dt).min(total));
            }
            w.sort_unstable();
            w.dedup();
            w
        }
    };
    let keep = |n: usize, wanted: &[usize]| match snapshots {
        Snapshots::EveryStep => true,
        Snapshots::Times(_) => wanted.binary_search(&n).is_ok(),
    };
    wanted.shrink_to_fit();

    let mut traj = Trajectory {
        grid: *u0.grid(),
        dt: cfg.dt,
        lambda: cfg.lambda,
        mu: stencil.mu,
        steps: Vec::new(),
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::with_capacity(total),
    };
    observer(0, u0, None);
    if keep(0, &wanted) {
        traj.steps.push(0);
        traj.times.push(0.0);
        traj.states.push(u0.clone());
    }
    let mut current = u0.clone();
    for n in 1..=total {
        let (next, diag) = stencil.solve(&current, cfg).map_err(|e| Error::Step {
            step: n,
            source: Box::new(e),
        })?;
        observer(n, &next, Some(&diag));
        traj.diagnostics.push(diag);
        if keep(n, &wanted) {
            traj.steps.push(n);
            traj.times.push(n as f64 * cfg.dt);
            traj.states.push(next.clone());
        }
        current = next;
    }
    Ok(traj)
}

/// Advance `problem.u0` to `t_end`.
pub fn run(problem: &Problem, cfg: &SolverConfig, t_end: f64, snapshots: &Snapshots) -> Result<Trajectory> {
    run_observed(problem, cfg, t_end, snapshots, |_, _, _| {})
}

/// [`run`], calling `observer(step, state, diagnostics)` for every state
/// including the initial one (which has no diagnostics).
pub fn run_observed<F>(
    problem: &Problem,
    cfg: &SolverConfig,
    t_end: f64,
    snapshots: &Snapshots,
    observer: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &GridFunction, Option<&StepDiagnostics>),
{
    let stencil = Stencil::new(cfg.lambda, &problem.k, &problem.model, 0.0);
    run_stencil(stencil, &problem.u0, cfg, t_end, snapshots, observer)
}
