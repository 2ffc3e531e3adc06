//! Convex entropies and the summed discrete entropy balance.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{require_every_step, PropertyReport};
use crate::error::{Error, Result};
use crate::implicit::Trajectory;
use crate::model::{CoefficientField, Nonlinearity};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Convex entropy `η` with first and second derivatives.
#[derive(Clone)]
pub enum EntropyFamily {
    /// `|u - c|_ε`, the smoothed absolute value built from
    /// `sign_ε(ξ) = sin(πξ / 2ε)` on `|ξ| <= ε`.
    Kruzkov { c: f64, eps: f64 },
    /// `u² / 2`.
    Quadratic,
    Custom {
        eta: ScalarFn,
        d_eta: ScalarFn,
        dd_eta: ScalarFn,
    },
}

impl fmt::Debug for EntropyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntropyFamily::Kruzkov { c, eps } => write!(f, "Kruzkov(c = {c}, eps = {eps})"),
            EntropyFamily::Quadratic => write!(f, "Quadratic"),
            EntropyFamily::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl EntropyFamily {
    pub fn kruzkov(c: f64, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) || !c.is_finite() {
            return Err(Error::invalid("eps", format!("Kruzkov entropy needs eps > 0, got {eps}")));
        }
        Ok(EntropyFamily::Kruzkov { c, eps })
    }

    pub fn custom<A, B, C>(eta: A, d_eta: B, dd_eta: C) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        EntropyFamily::Custom {
            eta: Arc::new(eta),
            d_eta: Arc::new(d_eta),
            dd_eta: Arc::new(dd_eta),
        }
    }

    pub fn name(&self) -> String {
        match self {
            EntropyFamily::Kruzkov { c, .. } => format!("entropy_kruzkov_{c}"),
            EntropyFamily::Quadratic => "entropy_quadratic".into(),
            EntropyFamily::Custom { .. } => "entropy_custom".into(),
        }
    }

    pub fn eta(&self, u: f64) -> f64 {
        match self {
            EntropyFamily::Kruzkov { c, eps } => {
                let s = u - c;
                let a = s.abs();
                if a <= *eps {
                    2.0 * eps / PI * (1.0 - (PI * s / (2.0 * eps)).cos())
                } else {
                    a - eps + 2.0 * eps / PI
                }
            }
            EntropyFamily::Quadratic => 0.5 * u * u,
            EntropyFamily::Custom { eta, .. } => eta(u),
        }
    }

    pub fn d_eta(&self, u: f64) -> f64 {
        match self {
            EntropyFamily::Kruzkov { c, eps } => {
                let s = u - c;
                if s > *eps {
                    1.0
                } else if s < -*eps {
                    -1.0
                } else {
                    (PI * s / (2.0 * eps)).sin()
                }
            }
            EntropyFamily::Quadratic => u,
            EntropyFamily::Custom { d_eta, .. } => d_eta(u),
        }
    }

    pub fn dd_eta(&self, u: f64) -> f64 {
        match self {
            EntropyFamily::Kruzkov { c, eps } => {
                let s = u - c;
                if s.abs() <= *eps {
                    PI / (2.0 * eps) * (PI * s / (2.0 * eps)).cos()
                } else {
                    0.0
                }
            }
            EntropyFamily::Quadratic => 1.0,
            EntropyFamily::Custom { dd_eta, .. } => dd_eta(u),
        }
    }

    /// Checks `η'' >= 0` on 1000 points of `[lo, hi]`.
    pub fn validate_convex(&self, lo: f64, hi: f64) -> Result<()> {
        if let EntropyFamily::Custom { .. } = self {
            let samples = 1000;
            for i in 0..samples {
                let u = if hi > lo { lo + (hi - lo) * i as f64 / (samples - 1) as f64 } else { lo };
                let d2 = self.dd_eta(u);
                if !(d2 >= 0.0) {
                    return Err(Error::invalid("entropy", format!("not convex: eta''({u}) = {d2}")));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of the summed entropy balance.
#[derive(Debug, Clone)]
pub struct EntropyReport {
    /// Per-step `R_n`; passes when every `R_n <= tolerance`.
    pub report: PropertyReport,
    /// Per-step dissipation `λ Σ_j (Δ₊η'(u_j)) (face flux)_j`, nonnegative for
    /// convex `η` and nondecreasing `G`.
    pub dissipation: Vec<f64>,
    pub min_dissipation: f64,
}

/// `λ Σ_j (Δ₊η'(u_j)) (k_{j+1/2} Δ₊G(u_j) + μ Δ₊u_j)` for one state.
pub(crate) fn entropy_dissipation(
    u: &[f64],
    family: &EntropyFamily,
    k: &CoefficientField,
    model: &Nonlinearity,
    lambda: f64,
    mu: f64,
) -> f64 {
    let mut s = 0.0;
    for j in 0..u.len() - 1 {
        let de = family.d_eta(u[j + 1]) - family.d_eta(u[j]);
        let mut flux = k.right_of(j) * (model.eval(u[j + 1]) - model.eval(u[j]));
        if mu != 0.0 {
            flux += mu * (u[j + 1] - u[j]);
        }
        s += de * flux;
    }
    lambda * s
}

/// Summed discrete entropy balance per step:
///
/// `R_n = Σ η(u^{n+1}) + λ Σ k_{j+1/2} (Δ₊η'(u^{n+1}_j)) (Δ₊G(u^{n+1}_j)) - Σ η(u^n)`,
///
/// which equals `-½ Σ η''(ξ_j) (u^{n+1}_j - u^n_j)² <= 0` up to the Newton
/// residual.
pub fn check_entropy_inequality(
    traj: &Trajectory,
    family: &EntropyFamily,
    k: &CoefficientField,
    model: &Nonlinearity,
    tol: f64,
) -> Result<EntropyReport> {
    require_every_step(traj, 2)?;
    let (lo, hi) = traj.states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let (a, b) = super::linf_bounds(s);
        (lo.min(a), hi.max(b))
    });
    family.validate_convex(lo, hi)?;

    let eta_sum = |u: &[f64]| u.iter().map(|&v| family.eta(v)).sum::<f64>();
    let mut residuals = Vec::with_capacity(traj.len() - 1);
    let mut dissipation = Vec::with_capacity(traj.len() - 1);
    let mut prev_sum = eta_sum(traj.states[0].values());
    for state in &traj.states[1..] {
        let u = state.values();
        let cur_sum = eta_sum(u);
        let d = entropy_dissipation(u, family, k, model, traj.lambda, traj.mu);
        residuals.push(cur_sum + d - prev_sum);
        dissipation.push(d);
        prev_sum = cur_sum;
    }
    let worst = residuals.iter().fold(0.0_f64, |m, &r| m.max(r));
    let min_dissipation = dissipation.iter().fold(f64::INFINITY, |m, &d| m.min(d));
    Ok(EntropyReport {
        report: PropertyReport::new(family.name(), traj.steps[1..].to_vec(), residuals, worst, tol),
        dissipation,
        min_dissipation,
    })
}

/// Per-step lower bound `λ Σ k_{j+1/2} η''(ū_j) (Δ₊g(u_j))²` obtained from
/// Jensen's inequality, with `ū_j` the midpoint of `u_j, u_{j+1}`. Reported
/// alongside the dissipation of [`check_entropy_inequality`] for comparison;
/// the midpoint choice makes it an estimate, not a certified bound.
pub fn jensen_dissipation(
    traj: &Trajectory,
    family: &EntropyFamily,
    k: &CoefficientField,
    model: &Nonlinearity,
) -> Result<Vec<f64>> {
    require_every_step(traj, 2)?;
    let mut out = Vec::with_capacity(traj.len() - 1);
    for state in &traj.states[1..] {
        let u = state.values();
        let g: Vec<f64> = u.iter().map(|&v| model.g(v)).collect::<Result<_>>()?;
        let mut s = 0.0;
        for j in 0..u.len() - 1 {
            let mid = 0.5 * (u[j] + u[j + 1]);
            let dg = g[j + 1] - g[j];
            s += k.right_of(j) * family.dd_eta(mid) * dg * dg;
        }
        out.push(traj.lambda * s);
    }
    Ok(out)
}
