//! JSON problem definition files and the embedded presets.
//!
//! ```json
//! {
//!   "n": 512,
//!   "dt_over_dx": 0.01,
//!   "t_end": 0.2,
//!   "G": "clipped_quadratic",
//!   "k": 1.0,
//!   "u0": "paper_sine",
//!   "snapshots": [0.0, 0.07, 0.13, 0.2]
//! }
//! ```
//!
//! `G` is `"clipped_quadratic"`, `"identity"` or `{"table": [[u, G], ...]}`.
//! `k` is a positive number, `"one"`, `"sine_bump"` or an array of `n + 2`
//! face values. `u0` is `"paper_sine"`, a number or an array of `n + 1` cell
//! values. Exactly one of `dt_over_dx`, `dt` and `mesh_ratio` is required.
//! `snapshots` defaults to `[0, t_end]`; `newton_tol` is a number (relative
//! tolerance) or `"paper"` (absolute `0.1 dx²`).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{
    CoefficientSource, Grid, InitialData, NewtonTolerance, Nonlinearity, ProblemDef, TimeStep, DEFAULT_NEWTON_TOL,
};

/// Raw contents of a problem file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_over_dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<Value>,
}

pub const PRESET_NAMES: [&str; 2] = ["paper-example", "heat"];

/// A validated problem file.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub config: ProblemConfig,
    pub def: ProblemDef,
    pub n: usize,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    /// True when `k` was left at its default of 1.
    pub k_defaulted: bool,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let key = msg.split('`').nth(1).unwrap_or("(document)").to_string();
            Error::config(key, msg)
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let g = match name {
            "paper-example" => "clipped_quadratic",
            "heat" => "identity",
            other => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset `{other}`, expected one of {}", PRESET_NAMES.join(", ")),
                ))
            }
        };
        Ok(ProblemConfig {
            n: Some(512),
            dt_over_dx: Some(0.01),
            dt: None,
            mesh_ratio: None,
            t_end: Some(0.2),
            g: Some(Value::from(g)),
            k: Some(Value::from(1.0)),
            u0: Some(Value::from("paper_sine")),
            snapshots: Some(vec![0.0, 0.07, 0.13, 0.2]),
            newton_tol: None,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<RunSpec> {
        let n = self.n.ok_or_else(|| Error::config("n", "missing"))?;
        let grid = Grid::new(n).map_err(|e| Error::config("n", e.to_string()))?;
        let t_end = self.t_end.ok_or_else(|| Error::config("t_end", "missing"))?;
        positive("t_end", t_end)?;

        let time_step = match (self.dt_over_dx, self.dt, self.mesh_ratio) {
            (Some(c), None, None) => positive("dt_over_dx", c).map(TimeStep::PerDx)?,
            (None, Some(dt), None) => positive("dt", dt).map(TimeStep::Fixed)?,
            (None, None, Some(l)) => positive("mesh_ratio", l).map(TimeStep::MeshRatio)?,
            (None, None, None) => return Err(Error::config("dt_over_dx", "one of dt_over_dx, dt, mesh_ratio is required")),
            _ => return Err(Error::config("dt", "give only one of dt_over_dx, dt, mesh_ratio")),
        };

        let model = match &self.g {
            None => return Err(Error::config("G", "missing")),
            Some(v) => parse_g(v)?,
        };
        let (k, k_defaulted) = match &self.k {
            None => (CoefficientSource::Constant(1.0), true),
            Some(v) => (parse_k(v)?, false),
        };
        let u0 = match &self.u0 {
            None => return Err(Error::config("u0", "missing")),
            Some(v) => parse_u0(v)?,
        };
        let newton_tol = match &self.newton_tol {
            None => NewtonTolerance::Relative(DEFAULT_NEWTON_TOL),
            Some(v) => parse_tolerance(v, &grid).map_err(|reason| Error::config("newton_tol", reason))?,
        };

        let snapshots = self.snapshots.clone().unwrap_or_else(|| vec![0.0, t_end]);
        if snapshots.is_empty() {
            return Err(Error::config("snapshots", "must not be empty"));
        }
        for w in snapshots.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::config("snapshots", "times must be strictly increasing"));
            }
        }
        if let Some(&bad) = snapshots.iter().find(|&&s| !(s.is_finite() && s >= 0.0 && s <= t_end)) {
            return Err(Error::config("snapshots", format!("time {bad} lies outside [0, t_end]")));
        }

        let mut def = ProblemDef::new(model, k, u0, time_step);
        def.newton_tol = newton_tol;
        def.k.on(&grid).map_err(|e| Error::config("k", e.to_string()))?;
        def.u0.on(&grid).map_err(|e| Error::config("u0", e.to_string()))?;

        Ok(RunSpec {
            config: self.clone(),
            def,
            n,
            t_end,
            snapshots,
            k_defaulted,
        })
    }
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        ProblemConfig::from_json(text)?.validate()
    }

    pub fn preset(name: &str) -> Result<Self> {
        ProblemConfig::preset(name)?.validate()
    }

    /// Overrides the Newton tolerance, keeping the echoed config in sync.
    pub fn set_newton_tol(&mut self, text: &str) -> Result<()> {
        let value = match text.trim() {
            "paper" => Value::from("paper"),
            s => Value::from(
                s.parse::<f64>()
                    .map_err(|_| Error::config("newton_tol", format!("expected a number or `paper`, got `{s}`")))?,
            ),
        };
        let grid = Grid::new(self.n)?;
        self.def.newton_tol = parse_tolerance(&value, &grid).map_err(|reason| Error::config("newton_tol", reason))?;
        self.config.newton_tol = Some(value);
        Ok(())
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn parse_tolerance(v: &Value, grid: &Grid) -> std::result::Result<NewtonTolerance, String> {
    match v {
        Value::String(s) if s == "paper" => Ok(NewtonTolerance::Absolute(0.1 * grid.dx() * grid.dx())),
        Value::Number(x) => {
            let t = x.as_f64().unwrap_or(f64::NAN);
            if t.is_finite() && t > 0.0 {
                Ok(NewtonTolerance::Relative(t))
            } else {
                Err(format!("must be positive, got {t}"))
            }
        }
        other => Err(format!("expected a number or \"paper\", got {other}")),
    }
}

fn number_array(key: &str, items: &[Value]) -> Result<Vec<f64>> {
    items
        .iter()
        .enumerate()
        .map(|(i, x)| x.as_f64().ok_or_else(|| Error::config(key, format!("entry {i} is not a number"))))
        .collect()
}

fn parse_g(v: &Value) -> Result<Nonlinearity> {
    match v {
        Value::String(s) => match s.as_str() {
            "clipped_quadratic" => Ok(Nonlinearity::clipped_quadratic()),
            "identity" => Ok(Nonlinearity::identity()),
            other => Err(Error::config(
                "G",
                format!("unknown builtin `{other}`, expected clipped_quadratic or identity"),
            )),
        },
        Value::Object(map) => {
            if let Some(extra) = map.keys().find(|k| k.as_str() != "table") {
                return Err(Error::config(format!("G.{extra}"), "unknown key"));
            }
            let rows = map
                .get("table")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::config("G.table", "expected an array of [u, G] pairs"))?;
            let mut points = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let pair = row.as_array().map(|r| number_array("G.table", r)).transpose()?;
                match pair.as_deref() {
                    Some([u, g]) => points.push((*u, *g)),
                    _ => return Err(Error::config("G.table", format!("row {i} is not a [u, G] pair"))),
                }
            }
            Nonlinearity::table(points).map_err(|e| Error::config("G.table", e.to_string()))
        }
        other => Err(Error::config("G", format!("expected a builtin name or a table, got {other}"))),
    }
}

fn parse_k(v: &Value) -> Result<CoefficientSource> {
    match v {
        Value::Number(x) => {
            let k = x.as_f64().unwrap_or(f64::NAN);
            positive("k", k).map(CoefficientSource::Constant)
        }
        Value::String(s) => match s.as_str() {
            "one" => Ok(CoefficientSource::Constant(1.0)),
            "sine_bump" => Ok(CoefficientSource::Function(Arc::new(|x| {
                1.0 + 0.5 * (std::f64::consts::PI * x).sin()
            }))),
            other => Err(Error::config("k", format!("unknown builtin `{other}`, expected one or sine_bump"))),
        },
        Value::Array(items) => Ok(CoefficientSource::FaceValues(number_array("k", items)?)),
        other => Err(Error::config("k", format!("expected a number, builtin name or array, got {other}"))),
    }
}

fn parse_u0(v: &Value) -> Result<InitialData> {
    match v {
        Value::Number(x) => {
            let c = x.as_f64().unwrap_or(f64::NAN);
            if c.is_finite() {
                Ok(InitialData::Constant(c))
            } else {
                Err(Error::config("u0", "constant must be finite"))
            }
        }
        Value::String(s) if s == "paper_sine" => Ok(InitialData::paper_sine()),
        Value::String(s) => Err(Error::config("u0", format!("unknown builtin `{s}`, expected paper_sine"))),
        Value::Array(items) => Ok(InitialData::CellValues(number_array("u0", items)?)),
        other => Err(Error::config("u0", format!("expected a number, builtin name or array, got {other}"))),
    }
}
