use std::io::Write;
use std::path::Path;
use std::time::Instant;

use degdiff_core::config::{ProblemConfig, RunSpec};
use degdiff_core::convergence::{refinement_study, viscosity_study, RefinementStudy, ViscosityStudy};
use degdiff_core::implicit::steps_until;
use degdiff_core::properties::{
    bv_seminorm, check_bv_nonincrease, check_conservation, check_entropy_inequality, check_l1_contraction,
    check_l1_nonincrease, check_l2_nonincrease, check_max_principle, check_time_continuity, default_tolerance,
    dissipation_increment, energy_balance, l1_norm, l2_norm, linf_bounds, mass, write_reports_csv, EntropyFamily,
    PropertyReport,
};
use degdiff_core::{
    run, run_observed, CoefficientField, CoefficientSource, GridFunction, Nonlinearity, Snapshots, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::files::{ensure_dir, write_file, write_snapshot, TrajectoryFile, FUNCTIONALS_HEADER};
use crate::CliError;

/// Per-step entropy residuals must stay below this.
pub const ENTROPY_TOL: f64 = 1e-8;

/// Kruzkov levels audited by `verify`.
pub const KRUZKOV_LEVELS: [f64; 9] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotEntry {
    pub time: f64,
    pub step: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ProblemConfig,
    pub n: usize,
    pub dt: f64,
    pub lambda: f64,
    pub steps: usize,
    pub newton_iterations: usize,
    /// Set when the coefficient is `k ≡ 1`, either given or assumed.
    pub k_assumed_unit: bool,
    pub snapshots: Vec<SnapshotEntry>,
    pub functionals: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    pub wall_time_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FUNCTIONALS_FILE: &str = "functionals.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const REPORT_FILE: &str = "report.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const VISCOSITY_FILE: &str = "viscosity.csv";

fn is_unit(k: &CoefficientSource) -> bool {
    matches!(k, CoefficientSource::Constant(c) if *c == 1.0)
}

pub fn cmd_run(spec: &RunSpec, out: &Path, save_trajectory: bool) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    ensure_dir(out)?;
    let (problem, cfg) = spec.def.instantiate(spec.n)?;
    let snapshots = if save_trajectory {
        Snapshots::EveryStep
    } else {
        Snapshots::Times(spec.snapshots.clone())
    };

    let mut rows = String::new();
    let traj = run_observed(&problem, &cfg, spec.t_end, &snapshots, |n, u, _| {
        let (lo, hi) = linf_bounds(u);
        let d = dissipation_increment(u, &problem.k, &problem.model, cfg.dt);
        rows.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            n as f64 * cfg.dt,
            mass(u),
            l1_norm(u),
            l2_norm(u),
            lo,
            hi,
            bv_seminorm(u),
            d
        ));
    })?;
    let total = steps_until(spec.t_end, cfg.dt);

    write_file(out, FUNCTIONALS_FILE, |w| {
        writeln!(w, "{FUNCTIONALS_HEADER}")?;
        w.write_all(rows.as_bytes())
    })?;

    let mut entries = Vec::with_capacity(spec.snapshots.len());
    for (i, &t) in spec.snapshots.iter().enumerate() {
        let step = steps_until(t, cfg.dt).min(total);
        let state = traj.at_step(step).expect("snapshot step is stored");
        let name = format!("snapshot_{i:03}.csv");
        write_file(out, &name, |w| write_snapshot(w, state))?;
        entries.push(SnapshotEntry { time: t, step, file: name });
    }

    let trajectory = if save_trajectory {
        let file = TrajectoryFile::from_trajectory(&traj, default_tolerance(&traj));
        write_file(out, TRAJECTORY_FILE, |w| {
            serde_json::to_writer(&mut *w, &file).map_err(std::io::Error::from)
        })?;
        Some(TRAJECTORY_FILE.to_string())
    } else {
        None
    };

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: spec.config.clone(),
        n: spec.n,
        dt: cfg.dt,
        lambda: cfg.lambda,
        steps: total,
        newton_iterations: traj.diagnostics.iter().map(|d| d.newton_iters).sum(),
        k_assumed_unit: is_unit(&spec.def.k),
        snapshots: entries,
        functionals: FUNCTIONALS_FILE.to_string(),
        trajectory,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    write_file(out, MANIFEST_FILE, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(std::io::Error::from)?;
        writeln!(w)
    })?;
    Ok(manifest)
}

/// Every single-trajectory property check at tolerance `tol`.
pub fn property_reports(
    traj: &Trajectory,
    k: &CoefficientField,
    model: &Nonlinearity,
    tol: f64,
) -> Result<Vec<PropertyReport>, CliError> {
    let mut reports = vec![
        check_conservation(traj, tol)?,
        check_bv_nonincrease(traj, tol)?,
        check_max_principle(traj, tol)?,
        check_l1_nonincrease(traj, tol)?,
        check_l2_nonincrease(traj, tol)?,
        check_time_continuity(traj, k, model, tol)?,
    ];
    if traj.len() >= 2 {
        let balance = energy_balance(traj, k, model)?;
        let last = *traj.steps.last().expect("nonempty");
        reports.push(PropertyReport::new(
            "energy_identity",
            vec![last],
            vec![balance.defect],
            balance.defect.abs(),
            tol,
        ));
        let eps = traj.grid.dx();
        let mut families = vec![EntropyFamily::Quadratic];
        for c in KRUZKOV_LEVELS {
            families.push(EntropyFamily::kruzkov(c, eps)?);
        }
        for fam in &families {
            reports.push(check_entropy_inequality(traj, fam, k, model, ENTROPY_TOL)?.report);
        }
    }
    Ok(reports)
}

fn finish_reports(out: &Path, reports: Vec<PropertyReport>) -> Result<Vec<PropertyReport>, CliError> {
    write_file(out, REPORT_FILE, |w| write_reports_csv(w, &reports))?;
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::Property(failed))
    }
}

/// Perturbation of `u` by independent uniform noise in `[-0.1, 0.1]`.
pub fn perturbed(u: &GridFunction, seed: u64) -> Result<GridFunction, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = u.values().iter().map(|x| x + rng.gen_range(-0.1..0.1)).collect();
    Ok(GridFunction::new(*u.grid(), v)?)
}

/// Run the problem storing every step, audit it and a seeded perturbed
/// companion run, and write `report.csv`.
pub fn cmd_verify(spec: &RunSpec, out: &Path, seed: u64) -> Result<Vec<PropertyReport>, CliError> {
    ensure_dir(out)?;
    let (problem, cfg) = spec.def.instantiate(spec.n)?;
    let other = problem.with_initial(perturbed(&problem.u0, seed)?)?;
    let (a, b) = rayon::join(
        || run(&problem, &cfg, spec.t_end, &Snapshots::EveryStep),
        || run(&other, &cfg, spec.t_end, &Snapshots::EveryStep),
    );
    let (a, b) = (a?, b?);
    let tol = default_tolerance(&a).max(default_tolerance(&b));
    let mut reports = property_reports(&a, &problem.k, &problem.model, tol)?;
    reports.insert(1, check_l1_contraction(&a, &b, tol)?);
    finish_reports(out, reports)
}

/// Audit a saved trajectory without running the solver.
pub fn cmd_verify_trajectory(spec: &RunSpec, trajectory: &Path, out: &Path) -> Result<Vec<PropertyReport>, CliError> {
    ensure_dir(out)?;
    let file = TrajectoryFile::load(trajectory)?;
    let traj = file.to_trajectory()?;
    let k = spec.def.k.on(&traj.grid)?;
    finish_reports(out, property_reports(&traj, &k, &spec.def.model, file.tolerance)?)
}

/// Snapshot times used for studies: the positive configured times, or
/// `t_end` alone.
fn study_times(spec: &RunSpec) -> Vec<f64> {
    let times: Vec<f64> = spec.snapshots.iter().copied().filter(|&t| t > 0.0).collect();
    if times.is_empty() {
        vec![spec.t_end]
    } else {
        times
    }
}

pub fn cmd_converge(spec: &RunSpec, cell_counts: &[usize], out: &Path) -> Result<RefinementStudy, CliError> {
    let study = refinement_study(&spec.def, cell_counts, spec.t_end, &study_times(spec))?;
    ensure_dir(out)?;
    write_file(out, CONVERGENCE_FILE, |w| study.write_csv(w))?;
    if study.is_strictly_decreasing() {
        Ok(study)
    } else {
        Err(CliError::Property(vec!["refinement_l1_differences_decreasing".into()]))
    }
}

pub fn cmd_viscosity(spec: &RunSpec, mus: &[f64], out: &Path) -> Result<ViscosityStudy, CliError> {
    let study = viscosity_study(&spec.def, spec.n, mus, spec.t_end)?;
    ensure_dir(out)?;
    write_file(out, VISCOSITY_FILE, |w| study.write_csv(w))?;
    if study.is_strictly_decreasing() {
        Ok(study)
    } else {
        Err(CliError::Property(vec!["viscosity_distance_decreasing".into()]))
    }
}
