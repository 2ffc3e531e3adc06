//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use degdiff_cli::cmd_run;
use degdiff_core::config::RunSpec;
use degdiff_core::convergence::{refinement_study, stability_experiment, viscosity_study};
use degdiff_core::properties::{
    check_bv_nonincrease, check_entropy_inequality, check_l1_contraction, check_max_principle,
    check_time_continuity, default_tolerance, dissipation_budget, energy_balance, mass, EntropyFamily,
};
use degdiff_core::{
    jacobian, newton_step_solve, residual, run, CoefficientField, Grid, GridFunction, Nonlinearity, ProblemDef,
    SolverConfig, Snapshots, TimeStep, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn random_state(rng: &mut ChaCha8Rng, grid: Grid, lo: f64, hi: f64) -> GridFunction {
    let v = (0..grid.cells()).map(|_| rng.gen_range(lo..hi)).collect();
    GridFunction::new(grid, v).unwrap()
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for q in c..n {
                a[r][q] -= f * a[c][q];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|q| a[r][q] * x[q]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn example_every_step() -> (Trajectory, CoefficientField, Nonlinearity) {
    let (problem, cfg) = ProblemDef::paper_example().instantiate(512).unwrap();
    let traj = run(&problem, &cfg, 0.2, &Snapshots::EveryStep).unwrap();
    (traj, problem.k, problem.model)
}

fn c1_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = Grid::new(63).unwrap();
    let k = CoefficientField::constant(&grid, 1.0).unwrap();
    let cfg = SolverConfig::new(&grid, TimeStep::MeshRatio(1.0)).unwrap();
    let prev = random_state(&mut rng, grid, -1.0, 1.0);
    let (u, diag) = newton_step_solve(&prev, &cfg, &k, &Nonlinearity::identity()).map_err(|e| e.to_string())?;
    let n = grid.cells();
    let mut a = vec![vec![0.0; n]; n];
    for j in 0..n {
        a[j][j] = 1.0;
        if j > 0 {
            a[j][j] += 1.0;
            a[j][j - 1] = -1.0;
        }
        if j + 1 < n {
            a[j][j] += 1.0;
            a[j][j + 1] = -1.0;
        }
    }
    let oracle = dense_solve(a, prev.values().to_vec());
    let err = u.values().iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    check(
        err <= 1e-8 && diag.newton_iters == 1 && secs < 1.0,
        format!("L∞ error {err:.3e}, {} Newton iteration(s), {secs:.3} s", diag.newton_iters),
    )
}

fn c2_conservation() -> Outcome {
    let start = Instant::now();
    let (problem, cfg) = ProblemDef::paper_example().instantiate(512).unwrap();
    let m0 = mass(&problem.u0);
    let mut drift = 0.0_f64;
    let mut steps = 0;
    degdiff_core::run_observed(&problem, &cfg, 0.2, &Snapshots::Times(vec![0.2]), |n, u, _| {
        drift = drift.max((mass(u) - m0).abs());
        steps = n;
    })
    .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        drift <= 1e-9 && secs < 60.0,
        format!("{steps} steps, max |mass drift| {drift:.3e}, {secs:.2} s"),
    )
}

/// 50 random pairs, clipped quadratic, N = 128, 200 steps.
fn sweep() -> Vec<(Trajectory, Trajectory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let def = ProblemDef::paper_example();
    let grid = Grid::new(128).unwrap();
    (0..50)
        .map(|_| {
            let u0 = random_state(&mut rng, grid, -2.0, 2.0);
            let v0 = random_state(&mut rng, grid, -2.0, 2.0);
            let (a, cfg) = def.instantiate_with(128, u0).unwrap();
            let b = a.with_initial(v0).unwrap();
            let t = 200.0 * cfg.dt;
            let ta = run(&a, &cfg, t, &Snapshots::EveryStep).unwrap();
            let tb = run(&b, &cfg, t, &Snapshots::EveryStep).unwrap();
            assert_eq!(ta.len(), 201);
            (ta, tb)
        })
        .collect()
}

fn pair_tol(a: &Trajectory, b: &Trajectory) -> f64 {
    default_tolerance(a).max(default_tolerance(b))
}

fn c3_contraction(pairs: &[(Trajectory, Trajectory)]) -> Outcome {
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for (a, b) in pairs {
        let r = check_l1_contraction(a, b, pair_tol(a, b)).map_err(|e| e.to_string())?;
        worst = worst.max(r.worst_violation);
        failures += usize::from(!r.passed);
    }
    check(
        failures == 0,
        format!("{} pairs, {failures} failures, worst increase {worst:.3e}", pairs.len()),
    )
}

fn c4_bv_max(pairs: &[(Trajectory, Trajectory)]) -> Outcome {
    let mut failures = 0;
    let (mut bv, mut mp) = (0.0_f64, 0.0_f64);
    for (a, b) in pairs {
        for t in [a, b] {
            let tol = default_tolerance(t);
            let r1 = check_bv_nonincrease(t, tol).map_err(|e| e.to_string())?;
            let r2 = check_max_principle(t, tol).map_err(|e| e.to_string())?;
            bv = bv.max(r1.worst_violation);
            mp = mp.max(r2.worst_violation);
            failures += usize::from(!r1.passed) + usize::from(!r2.passed);
        }
    }
    check(
        failures == 0,
        format!("{} runs, {failures} failures, worst BV excess {bv:.3e}, worst range excess {mp:.3e}", 2 * pairs.len()),
    )
}

fn c5_entropy(traj: &Trajectory, k: &CoefficientField, model: &Nonlinearity) -> Outcome {
    let mut families = vec![EntropyFamily::Quadratic];
    for i in 0..=8 {
        families.push(EntropyFamily::kruzkov(-2.0 + 0.5 * i as f64, traj.grid.dx()).unwrap());
    }
    let mut worst = f64::NEG_INFINITY;
    let mut failed = Vec::new();
    for fam in &families {
        let r = check_entropy_inequality(traj, fam, k, model, 1e-8).map_err(|e| e.to_string())?;
        let max_r = r.report.per_step_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(max_r);
        if !r.report.passed {
            failed.push(r.report.name);
        }
    }
    check(
        failed.is_empty(),
        format!("{} entropies, max R_n {worst:.3e}, failing {failed:?}", families.len()),
    )
}

fn c6_energy() -> Outcome {
    let (problem, cfg) = ProblemDef::heat().instantiate(512).unwrap();
    let traj = run(&problem, &cfg, 0.2, &Snapshots::EveryStep).map_err(|e| e.to_string())?;
    let b = energy_balance(&traj, &problem.k, &problem.model).map_err(|e| e.to_string())?;
    let budget = dissipation_budget(&traj, &problem.k, &problem.model).map_err(|e| e.to_string())?;
    let defect = (b.l2_drop - budget - b.time_increment).abs();
    check(
        defect <= 1e-8,
        format!(
            "L2 drop {:.6e}, dissipation {budget:.6e}, time increment {:.3e}, defect {defect:.3e}",
            b.l2_drop, b.time_increment
        ),
    )
}

fn c7_time_continuity(traj: &Trajectory, k: &CoefficientField, model: &Nonlinearity) -> Outcome {
    let r = check_time_continuity(traj, k, model, default_tolerance(traj)).map_err(|e| e.to_string())?;
    let max_incr = r.per_step_values.iter().cloned().fold(0.0, f64::max);
    check(
        r.passed,
        format!("{} steps, largest increment {max_incr:.6e}, worst excess {:.3e}", r.steps.len(), r.worst_violation),
    )
}

fn c8_convergence() -> Outcome {
    let cells = [64, 128, 256, 512];
    let example = refinement_study(&ProblemDef::paper_example(), &cells, 0.2, &[0.2]).map_err(|e| e.to_string())?;
    let heat = refinement_study(&ProblemDef::heat(), &cells, 0.2, &[0.2]).map_err(|e| e.to_string())?;
    let diffs: Vec<f64> = example.l1_differences.iter().map(|d| d[0]).collect();
    let order = heat.min_order(0).unwrap_or(f64::NAN);
    check(
        example.is_strictly_decreasing() && order >= 0.8,
        format!("example differences [{}], heat minimum order {order:.3}", sci(&diffs)),
    )
}

fn c9_viscosity() -> Outcome {
    let s = viscosity_study(&ProblemDef::paper_example(), 128, &[0.1, 0.01, 0.001], 0.1).map_err(|e| e.to_string())?;
    check(s.is_strictly_decreasing(), format!("distances [{}]", sci(&s.distances)))
}

fn c10_stability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let def = ProblemDef::paper_example();
    let grid = Grid::new(128).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let u0 = random_state(&mut rng, grid, -2.0, 2.0);
        let v0 = random_state(&mut rng, grid, -2.0, 2.0);
        let s = stability_experiment(&u0, &v0, &def, 0.02).map_err(|e| e.to_string())?;
        worst = worst.max(s.max_ratio());
    }
    check(worst <= 1.0 + 1e-8, format!("20 pairs, largest ratio {worst:.15}"))
}

fn c11_jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = Nonlinearity::clipped_quadratic();
    let grid = Grid::new(63).unwrap();
    let k = CoefficientField::from_fn(&grid, |x| 1.0 + 0.5 * (3.0 * x).sin()).unwrap();
    let lambda = 0.01 / grid.dx();
    let h = 1e-7;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let v = (0..grid.cells())
            .map(|_| loop {
                let x: f64 = rng.gen_range(-0.5..1.5);
                if x.abs() >= 1e-3 && (x - 1.0).abs() >= 1e-3 {
                    break x;
                }
            })
            .collect();
        let u = GridFunction::new(grid, v).unwrap();
        let prev = random_state(&mut rng, grid, -1.0, 1.0);
        let dir: Vec<f64> = (0..grid.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted = |s: f64| {
            let v = u.values().iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            GridFunction::new(grid, v).unwrap()
        };
        let fp = residual(&shifted(h), &prev, lambda, &k, &model).map_err(|e| e.to_string())?;
        let fm = residual(&shifted(-h), &prev, lambda, &k, &model).map_err(|e| e.to_string())?;
        let jv = jacobian(&u, lambda, &k, &model).map_err(|e| e.to_string())?.mul_vec(&dir);
        let err = fp.iter().zip(&fm).zip(&jv).map(|((p, m), j)| ((p - m) / (2.0 * h) - j).abs()).fold(0.0, f64::max);
        let scale = jv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        worst = worst.max(err / scale);
    }
    check(worst <= 1e-6, format!("100 states, worst relative error {worst:.3e}"))
}

fn read_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).unwrap();
        if name == "manifest.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_seconds");
            bytes = serde_json::to_vec(&v).unwrap();
        }
        files.insert(name, bytes);
    }
    files
}

fn c12_determinism() -> Outcome {
    let spec = RunSpec::preset("paper-example").map_err(|e| e.to_string())?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        cmd_run(&spec, d.path(), false).map_err(|e| e.to_string())?;
    }
    let (a, b) = (read_outputs(dirs[0].path()), read_outputs(dirs[1].path()));
    let same = a == b && a.len() >= 6;
    check(same, format!("{} files compared (manifest without wall time)", a.len()))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let (traj, k, model) = example_every_step();
    let pairs = sweep();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 solvability and dense-oracle equivalence", c1_oracle()),
        ("2 conservation over the example run", c2_conservation()),
        ("3 L1 contraction sweep", c3_contraction(&pairs)),
        ("4 BV nonincrease and maximum principle sweep", c4_bv_max(&pairs)),
        ("5 entropy inequality", c5_entropy(&traj, &k, &model)),
        ("6 energy identity", c6_energy()),
        ("7 time continuity", c7_time_continuity(&traj, &k, &model)),
        ("8 grid refinement", c8_convergence()),
        ("9 vanishing viscosity", c9_viscosity()),
        ("10 stability bound", c10_stability()),
        ("11 Jacobian finite-difference check", c11_jacobian()),
        ("12 determinism of run output", c12_determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
