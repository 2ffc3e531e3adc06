//! The nondecreasing Lipschitz nonlinearity `G` and its derived quantities.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use super::quadrature::adaptive_simpson;
use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sample count used to validate user-supplied nonlinearities.
pub const VALIDATION_SAMPLES: usize = 10_000;

const G_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityKind {
    /// `0` for `u < 0`, `u (2 - u)` on `[0, 1]`, `1` for `u > 1`.
    ClippedQuadratic,
    Identity,
    /// Piecewise-linear interpolation of a table, constant outside it.
    Table,
    /// User closures for `G` and `G'`.
    Custom,
}

#[derive(Clone)]
enum Repr {
    ClippedQuadratic,
    Identity,
    Table(Arc<[(f64, f64)]>),
    Custom {
        eval: ScalarFn,
        deriv: ScalarFn,
        breakpoints: Arc<[f64]>,
    },
}

/// A nondecreasing, Lipschitz-continuous `G` with derivative and bound.
///
/// Derivatives at kinks are one-sided: the value of the branch that
/// contains the point (right branch for the clipped quadratic at `u = 0`,
/// the segment starting at a node for tables).
#[derive(Clone)]
pub struct Nonlinearity {
    repr: Repr,
    lipschitz: f64,
    g_cache: Arc<Mutex<HashMap<u64, f64>>>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("kind", &self.kind())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Nonlinearity {
    fn from_repr(repr: Repr, lipschitz: f64) -> Self {
        Nonlinearity {
            repr,
            lipschitz,
            g_cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn clipped_quadratic() -> Self {
        Self::from_repr(Repr::ClippedQuadratic, 2.0)
    }

    pub fn identity() -> Self {
        Self::from_repr(Repr::Identity, 1.0)
    }

    /// Piecewise-linear `G` through `points` (strictly increasing `u`,
    /// nondecreasing `G`), extended by constants outside the table.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidNonlinearity(
                "table needs at least two points".into(),
            ));
        }
        if points.iter().any(|(u, g)| !u.is_finite() || !g.is_finite()) {
            return Err(Error::NonFinite("nonlinearity table".into()));
        }
        let mut lipschitz: f64 = 0.0;
        for w in points.windows(2) {
            let (u0, g0) = w[0];
            let (u1, g1) = w[1];
            if u1 <= u0 {
                return Err(Error::InvalidNonlinearity(format!(
                    "table abscissae must increase strictly ({u0} then {u1})"
                )));
            }
            if g1 < g0 {
                return Err(Error::InvalidNonlinearity(format!(
                    "table values must be nondecreasing ({g0} then {g1})"
                )));
            }
            lipschitz = lipschitz.max((g1 - g0) / (u1 - u0));
        }
        Ok(Self::from_repr(Repr::Table(points.into()), lipschitz.max(f64::MIN_POSITIVE)))
    }

    /// User-supplied `G` with derivative and Lipschitz bound.
    ///
    /// Monotonicity and the bound are checked on [`VALIDATION_SAMPLES`]
    /// points spread over `sample_range`. `breakpoints` lists kinks of `G`
    /// so the quadrature for `g` can split there; it may be empty.
    pub fn custom<E, D>(
        eval: E,
        deriv: D,
        lipschitz: f64,
        sample_range: (f64, f64),
        breakpoints: Vec<f64>,
    ) -> Result<Self>
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::InvalidNonlinearity(format!(
                "Lipschitz constant must be positive and finite, got {lipschitz}"
            )));
        }
        let (lo, hi) = sample_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("sample_range", format!("({lo}, {hi})")));
        }
        let slack = 1e-9 * lipschitz;
        let step = (hi - lo) / (VALIDATION_SAMPLES - 1) as f64;
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..VALIDATION_SAMPLES {
            let u = if i + 1 == VALIDATION_SAMPLES { hi } else { lo + i as f64 * step };
            let g = eval(u);
            let d = deriv(u);
            if !g.is_finite() || !d.is_finite() {
                return Err(Error::NonFinite(format!("nonlinearity at u = {u}")));
            }
            if d < -slack {
                return Err(Error::InvalidNonlinearity(format!(
                    "derivative {d} < 0 at u = {u}"
                )));
            }
            if d > lipschitz + slack {
                return Err(Error::InvalidNonlinearity(format!(
                    "derivative {d} exceeds Lipschitz bound {lipschitz} at u = {u}"
                )));
            }
            if let Some((pu, pg)) = prev {
                if g < pg - slack * (u - pu) {
                    return Err(Error::InvalidNonlinearity(format!(
                        "G decreases between u = {pu} and u = {u}"
                    )));
                }
                if (g - pg).abs() > (lipschitz + slack) * (u - pu) * (1.0 + 1e-9) {
                    return Err(Error::InvalidNonlinearity(format!(
                        "G violates the Lipschitz bound between u = {pu} and u = {u}"
                    )));
                }
            }
            prev = Some((u, g));
        }
        let mut breakpoints = breakpoints;
        breakpoints.retain(|b| b.is_finite());
        breakpoints.sort_by(f64::total_cmp);
        Ok(Self::from_repr(
            Repr::Custom {
                eval: Arc::new(eval),
                deriv: Arc::new(deriv),
                breakpoints: breakpoints.into(),
            },
            lipschitz,
        ))
    }

    pub fn kind(&self) -> NonlinearityKind {
        match self.repr {
            Repr::ClippedQuadratic => NonlinearityKind::ClippedQuadratic,
            Repr::Identity => NonlinearityKind::Identity,
            Repr::Table(_) => NonlinearityKind::Table,
            Repr::Custom { .. } => NonlinearityKind::Custom,
        }
    }

    pub fn lipschitz_const(&self) -> f64 {
        self.lipschitz
    }

    /// `G(u)`; unchecked hot-path evaluation.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::ClippedQuadratic => {
                if u < 0.0 {
                    0.0
                } else if u <= 1.0 {
                    u * (2.0 - u)
                } else {
                    1.0
                }
            }
            Repr::Identity => u,
            Repr::Table(pts) => table_eval(pts, u),
            Repr::Custom { eval, .. } => eval(u),
        }
    }

    /// `G'(u)` with the branch convention described on the type.
    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::ClippedQuadratic => {
                if (0.0..1.0).contains(&u) {
                    2.0 - 2.0 * u
                } else {
                    0.0
                }
            }
            Repr::Identity => 1.0,
            Repr::Table(pts) => table_slope(pts, u),
            Repr::Custom { deriv, .. } => deriv(u),
        }
    }

    /// Checked `G(u)`.
    pub fn try_eval(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("argument of G: {u}")));
        }
        Ok(self.eval(u))
    }

    /// Points where `G'` may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.repr {
            Repr::ClippedQuadratic => vec![0.0, 1.0],
            Repr::Identity => Vec::new(),
            Repr::Table(pts) => pts.iter().map(|p| p.0).collect(),
            Repr::Custom { breakpoints, .. } => breakpoints.to_vec(),
        }
    }

    /// `g(u) = ∫_0^u sqrt(G'(s)) ds`, by adaptive Simpson split at the
    /// breakpoints of `G`. Results are memoized per model.
    pub fn g(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("argument of g: {u}")));
        }
        let key = u.to_bits();
        if let Some(&v) = self.g_cache.lock().expect("g cache poisoned").get(&key) {
            return Ok(v);
        }
        let value = match self.repr {
            Repr::Identity => u,
            _ => {
                let (lo, hi, sign) = if u >= 0.0 { (0.0, u, 1.0) } else { (u, 0.0, -1.0) };
                let mut cuts: Vec<f64> = vec![lo];
                cuts.extend(self.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
                cuts.push(hi);
                let pieces = cuts.len() - 1;
                let total: f64 = cuts
                    .windows(2)
                    .map(|w| {
                        // G' is smooth inside each piece; endpoints take the inner branch
                        let (a, b) = (w[0], w[1]);
                        let inset = 1e-13 * (b - a);
                        let f = |s: f64| self.deriv(s.clamp(a + inset, b - inset)).max(0.0).sqrt();
                        adaptive_simpson(&f, a, b, G_QUAD_TOL / pieces as f64)
                    })
                    .sum();
                sign * total
            }
        };
        self.g_cache
            .lock()
            .expect("g cache poisoned")
            .insert(key, value);
        Ok(value)
    }
}

fn table_eval(pts: &[(f64, f64)], u: f64) -> f64 {
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if u <= first.0 {
        return first.1;
    }
    if u >= last.0 {
        return last.1;
    }
    let i = pts.partition_point(|p| p.0 <= u) - 1;
    let (u0, g0) = pts[i];
    let (u1, g1) = pts[i + 1];
    g0 + (g1 - g0) * (u - u0) / (u1 - u0)
}

fn table_slope(pts: &[(f64, f64)], u: f64) -> f64 {
    if u < pts[0].0 || u >= pts[pts.len() - 1].0 {
        return 0.0;
    }
    let i = pts.partition_point(|p| p.0 <= u) - 1;
    let (u0, g0) = pts[i];
    let (u1, g1) = pts[i + 1];
    (g1 - g0) / (u1 - u0)
}
