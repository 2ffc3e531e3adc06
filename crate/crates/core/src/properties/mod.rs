//! Discrete functionals and pass/fail checks for the estimates the scheme
//! satisfies: conservation, L1 contraction, BV and maximum-principle bounds,
//! entropy balance, time continuity, flux BV, dissipation and a Hölder-type
//! modulus of `G(u)`.

mod entropy;

use std::io::{self, Write};

pub use entropy::{check_entropy_inequality, jensen_dissipation, EntropyFamily, EntropyReport};

use crate::error::{Error, Result};
use crate::implicit::{Stencil, Trajectory};
use crate::model::{CoefficientField, GridFunction, Nonlinearity};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    /// Step index of each entry of `per_step_values`.
    pub steps: Vec<usize>,
    pub per_step_values: Vec<f64>,
    pub worst_violation: f64,
    pub passed: bool,
    pub tolerance: f64,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, steps: Vec<usize>, values: Vec<f64>, worst_violation: f64, tolerance: f64) -> Self {
        PropertyReport {
            name: name.into(),
            steps,
            per_step_values: values,
            worst_violation,
            passed: worst_violation <= tolerance,
            tolerance,
        }
    }
}

pub const CSV_HEADER: &str = "name,step,value,tolerance,passed";

/// Write reports as `name,step,value,tolerance,passed` rows, header first.
pub fn write_reports_csv<W: Write>(mut w: W, reports: &[PropertyReport]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        for (step, value) in r.steps.iter().zip(&r.per_step_values) {
            writeln!(w, "{},{},{:?},{:?},{}", r.name, step, value, r.tolerance, r.passed)?;
        }
    }
    Ok(())
}

/// `dx Σ u_j`.
pub fn mass(u: &GridFunction) -> f64 {
    u.grid().dx() * u.values().iter().sum::<f64>()
}

/// `dx Σ |u_j|`.
pub fn l1_norm(u: &GridFunction) -> f64 {
    u.grid().dx() * u.values().iter().map(|v| v.abs()).sum::<f64>()
}

/// `(dx Σ u_j²)^{1/2}`.
pub fn l2_norm(u: &GridFunction) -> f64 {
    (u.grid().dx() * u.values().iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn linf_bounds(u: &GridFunction) -> (f64, f64) {
    u.values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// `Σ_j |u_{j+1} - u_j|`.
pub fn bv_seminorm(u: &GridFunction) -> f64 {
    u.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Unweighted `Σ_j |u_j - v_j|`.
pub fn l1_distance_sum(u: &GridFunction, v: &GridFunction) -> f64 {
    u.values().iter().zip(v.values()).map(|(a, b)| (a - b).abs()).sum()
}

/// `10² (N + 1) · tol`, with `tol` the largest resolved Newton tolerance of
/// the run (falling back to `1e-12` for trajectories without diagnostics).
pub fn default_tolerance(traj: &Trajectory) -> f64 {
    let tol = traj
        .diagnostics
        .iter()
        .map(|d| d.tolerance)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))))
        .unwrap_or(crate::model::DEFAULT_NEWTON_TOL);
    100.0 * traj.grid.cells() as f64 * tol
}

pub(crate) fn require_every_step(traj: &Trajectory, min_states: usize) -> Result<()> {
    if traj.len() < min_states {
        return Err(Error::invalid(
            "trajectory",
            format!("needs at least {min_states} states, has {}", traj.len()),
        ));
    }
    if !traj.is_every_step() {
        return Err(Error::invalid("trajectory", "check needs every time step recorded"));
    }
    Ok(())
}

/// Worst `|mass(u^n) - mass(u^0)|`.
pub fn check_conservation(traj: &Trajectory, tol: f64) -> Result<PropertyReport> {
    require_every_step(traj, 1)?;
    let m0 = mass(traj.first());
    let drift: Vec<f64> = traj.states.iter().map(|s| mass(s) - m0).collect();
    let worst = drift.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    Ok(PropertyReport::new("conservation", traj.steps.clone(), drift, worst, tol))
}

/// `Σ|u^n - v^n|` must not increase from one step to the next.
pub fn check_l1_contraction(a: &Trajectory, b: &Trajectory, tol: f64) -> Result<PropertyReport> {
    require_every_step(a, 1)?;
    require_every_step(b, 1)?;
    if a.grid != b.grid {
        return Err(Error::ShapeMismatch {
            expected: a.grid.cells(),
            found: b.grid.cells(),
        });
    }
    if a.steps != b.steps || a.dt != b.dt {
        return Err(Error::invalid("trajectory", "trajectories cover different steps"));
    }
    let d: Vec<f64> = a.states.iter().zip(&b.states).map(|(u, v)| l1_distance_sum(u, v)).collect();
    let worst = d.windows(2).fold(0.0_f64, |m, w| m.max(w[1] - w[0]));
    Ok(PropertyReport::new("l1_contraction", a.steps.clone(), d, worst, tol))
}

/// `BV(u^n) <= BV(u^0)` for all `n`.
pub fn check_bv_nonincrease(traj: &Trajectory, tol: f64) -> Result<PropertyReport> {
    require_every_step(traj, 1)?;
    let bv: Vec<f64> = traj.states.iter().map(bv_seminorm).collect();
    let worst = bv.iter().fold(0.0_f64, |m, &v| m.max(v - bv[0]));
    Ok(PropertyReport::new("bv_nonincrease", traj.steps.clone(), bv, worst, tol))
}

/// `min u^0 <= u^n_j <= max u^0` for all `n, j`.
pub fn check_max_principle(traj: &Trajectory, tol: f64) -> Result<PropertyReport> {
    require_every_step(traj, 1)?;
    let (lo0, hi0) = linf_bounds(traj.first());
    let excess: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            let (lo, hi) = linf_bounds(s);
            (lo0 - lo).max(hi - hi0).max(0.0)
        })
        .collect();
    let worst = excess.iter().fold(0.0_f64, |m, &v| m.max(v));
    Ok(PropertyReport::new("max_principle", traj.steps.clone(), excess, worst, tol))
}

/// Per-step `Σ (u^{n+1})² - Σ (u^n)² <= 0`.
pub fn check_l2_nonincrease(traj: &Trajectory, tol: f64) -> Result<PropertyReport> {
    per_step_decrease(traj, tol, "l2_nonincrease", |u| u.values().iter().map(|v| v * v).sum())
}

/// Per-step `Σ |u^{n+1}| - Σ |u^n| <= 0`.
pub fn check_l1_nonincrease(traj: &Trajectory, tol: f64) -> Result<PropertyReport> {
    per_step_decrease(traj, tol, "l1_nonincrease", |u| u.values().iter().map(|v| v.abs()).sum())
}

fn per_step_decrease<F: Fn(&GridFunction) -> f64>(traj: &Trajectory, tol: f64, name: &str, f: F) -> Result<PropertyReport> {
    require_every_step(traj, 1)?;
    let vals: Vec<f64> = traj.states.iter().map(f).collect();
    let worst = vals.windows(2).fold(0.0_f64, |m, w| m.max(w[1] - w[0]));
    Ok(PropertyReport::new(name, traj.steps.clone(), vals, worst, tol))
}

/// Explicit back step `u^{-1}` for the trajectory's own operator.
fn back_state(traj: &Trajectory, k: &CoefficientField, model: &Nonlinearity) -> Result<Vec<f64>> {
    let u0 = traj.first();
    if k.cells() != u0.len() {
        return Err(Error::ShapeMismatch {
            expected: u0.len() + 1,
            found: k.face_values().len(),
        });
    }
    let s = Stencil::new(traj.lambda, k, model, traj.mu);
    let div = s.divergence(u0.values());
    Ok(u0.values().iter().zip(div).map(|(a, d)| a - d).collect())
}

/// `Σ|u^{n+1} - u^n| <= Σ|u^0 - u^{-1}|` for every step.
pub fn check_time_continuity(traj: &Trajectory, k: &CoefficientField, model: &Nonlinearity, tol: f64) -> Result<PropertyReport> {
    require_every_step(traj, 1)?;
    let back = back_state(traj, k, model)?;
    let bound: f64 = traj.first().values().iter().zip(&back).map(|(a, b)| (a - b).abs()).sum();
    let incr: Vec<f64> = traj.states.windows(2).map(|w| l1_distance_sum(&w[1], &w[0])).collect();
    let worst = incr.iter().fold(0.0_f64, |m, &v| m.max(v - bound));
    Ok(PropertyReport::new(
        "time_continuity",
        traj.steps[1..].to_vec(),
        incr,
        worst,
        tol,
    ))
}

/// `(1/dx) Σ_j |φ_{j+1/2} - φ_{j-1/2}|` with `φ` the face flux `k Δ₊G(u)`.
pub fn flux_bv(u: &GridFunction, k: &CoefficientField, model: &Nonlinearity) -> Result<f64> {
    if k.cells() != u.len() {
        return Err(Error::ShapeMismatch {
            expected: u.len() + 1,
            found: k.face_values().len(),
        });
    }
    let div = Stencil::new(1.0, k, model, 0.0).divergence(u.values());
    Ok(div.iter().map(|d| d.abs()).sum::<f64>() / u.grid().dx())
}

/// `dt dx Σ_j k_{j+1/2} (Δ₊G(u_j) / dx)²` for one state.
pub fn dissipation_increment(u: &GridFunction, k: &CoefficientField, model: &Nonlinearity, dt: f64) -> f64 {
    let dx = u.grid().dx();
    let v = u.values();
    let s: f64 = (0..v.len() - 1)
        .map(|j| {
            let dg = model.eval(v[j + 1]) - model.eval(v[j]);
            k.right_of(j) * dg * dg
        })
        .sum();
    dt / dx * s
}

/// Sum of [`dissipation_increment`] over `u^1, …, u^M`.
pub fn dissipation_budget(traj: &Trajectory, k: &CoefficientField, model: &Nonlinearity) -> Result<f64> {
    require_every_step(traj, 1)?;
    if k.cells() != traj.grid.cells() {
        return Err(Error::ShapeMismatch {
            expected: traj.grid.cells() + 1,
            found: k.face_values().len(),
        });
    }
    Ok(traj.states[1..]
        .iter()
        .map(|u| dissipation_increment(u, k, model, traj.dt))
        .sum())
}

/// Terms of the discrete energy identity for `η = u²/2`:
/// `½‖u^0‖² - ½‖u^M‖² = Σ_n dt dx Σ_j k (Δ₊u)(Δ₊G)/dx² + (dx/2) Σ_n Σ_j (λ Δ₊(k Δ₋G))²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub l2_drop: f64,
    /// `dt dx Σ_n Σ_j k_{j+1/2} (Δ₊u)(Δ₊G) / dx²`; equals
    /// [`dissipation_budget`] when `G` is the identity.
    pub dissipation: f64,
    /// Dissipation from the implicit time discretization.
    pub time_increment: f64,
    pub defect: f64,
}

pub fn energy_balance(traj: &Trajectory, k: &CoefficientField, model: &Nonlinearity) -> Result<EnergyBalance> {
    require_every_step(traj, 1)?;
    let dx = traj.grid.dx();
    let half_sq = |u: &GridFunction| 0.5 * dx * u.values().iter().map(|v| v * v).sum::<f64>();
    let l2_drop = half_sq(traj.first()) - half_sq(traj.last());
    let stencil = Stencil::new(traj.lambda, k, model, traj.mu);
    let mut dissipation = 0.0;
    let mut time_increment = 0.0;
    for u in &traj.states[1..] {
        let v = u.values();
        let flux = stencil.fluxes(v);
        dissipation += traj.lambda * dx * flux.iter().zip(v.windows(2)).map(|(f, w)| f * (w[1] - w[0])).sum::<f64>();
        time_increment += 0.5 * dx * stencil.divergence(v).iter().map(|d| d * d).sum::<f64>();
    }
    Ok(EnergyBalance {
        l2_drop,
        dissipation,
        time_increment,
        defect: (l2_drop - dissipation - time_increment).abs(),
    })
}

/// Sample cell pairs at strides 1, 2, 4, … with an equal share of
/// `pair_count` per stride, spread evenly along the grid.
fn holder_pairs(cells: usize, pair_count: usize) -> Vec<(usize, usize)> {
    let mut strides = Vec::new();
    let mut s = 1;
    while s < cells {
        strides.push(s);
        s *= 2;
    }
    let quota = (pair_count / strides.len().max(1)).max(1);
    let mut pairs = Vec::new();
    for &s in &strides {
        let avail = cells - s;
        let q = quota.min(avail);
        for m in 0..q {
            let i = if q == 1 { 0 } else { m * (avail - 1) / (q - 1) };
            pairs.push((i, i + s));
        }
    }
    pairs.truncate(pair_count.max(1));
    pairs
}

/// `max over pairs (i, j) of dt_s Σ_n |G(u^n_i) - G(u^n_j)| / (T sqrt|x_i - x_j|)`,
/// with `dt_s` the spacing of stored states and `T` the covered time.
pub fn holder_modulus(traj: &Trajectory, model: &Nonlinearity, pair_count: usize) -> Result<f64> {
    let cells = traj.grid.cells();
    if cells < 2 {
        return Err(Error::invalid("trajectory", "needs at least two cells"));
    }
    if traj.len() < 2 {
        return Err(Error::invalid("trajectory", "needs at least two stored states"));
    }
    let stride = traj.steps[1] - traj.steps[0];
    if stride == 0 || traj.steps.windows(2).any(|w| w[1] - w[0] != stride) {
        return Err(Error::invalid("trajectory", "states must be uniformly spaced in time"));
    }
    let dts = stride as f64 * traj.dt;
    let horizon = (traj.len() - 1) as f64 * dts;
    let pairs = holder_pairs(cells, pair_count);
    let gvals: Vec<Vec<f64>> = traj.states[..traj.len() - 1]
        .iter()
        .map(|s| s.values().iter().map(|&v| model.eval(v)).collect())
        .collect();
    let dx = traj.grid.dx();
    let worst = pairs
        .iter()
        .map(|&(i, j)| {
            let integral: f64 = gvals.iter().map(|g| (g[i] - g[j]).abs()).sum::<f64>() * dts;
            integral / (horizon * ((j - i) as f64 * dx).sqrt())
        })
        .fold(0.0_f64, f64::max);
    Ok(worst)
}
