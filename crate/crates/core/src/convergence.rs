//! Grid-refinement, L1-stability and vanishing-viscosity studies.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::implicit::{run, Snapshots, Trajectory};
use crate::model::{Grid, GridFunction, ProblemDef};
use crate::properties::l1_distance_sum;
use crate::viscous::{viscous_run, ViscosityConfig};

/// Differences below this are treated as exact zeros when checking decrease.
pub const ZERO_FLOOR: f64 = 1e-13;

/// Average a fine grid function onto the grid with half as many cells.
pub fn restrict(fine: &GridFunction, coarse: &Grid) -> Result<GridFunction> {
    if fine.grid().cells() != 2 * coarse.cells() {
        return Err(Error::invalid(
            "levels",
            format!(
                "grids with {} and {} cells are not nested",
                coarse.cells(),
                fine.grid().cells()
            ),
        ));
    }
    let v = fine.values();
    let values = (0..coarse.cells()).map(|j| 0.5 * (v[2 * j] + v[2 * j + 1])).collect();
    GridFunction::new(*coarse, values)
}

/// `dx Σ |u_j - v_j|`.
fn l1_distance(u: &GridFunction, v: &GridFunction) -> f64 {
    u.grid().dx() * l1_distance_sum(u, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    /// Cell-count parameter `N` of each level.
    pub levels: Vec<usize>,
    pub snapshot_times: Vec<f64>,
    /// `l1_differences[m][s]`: L1 distance between level `m` and the
    /// restriction of level `m + 1`, at snapshot `s`.
    pub l1_differences: Vec<Vec<f64>>,
    /// `observed_orders[m][s] = log2(d[m][s] / d[m + 1][s])`.
    pub observed_orders: Vec<Vec<f64>>,
}

impl RefinementStudy {
    /// True when, at every snapshot, each difference is strictly smaller
    /// than the one before it (pairs of exact zeros also count).
    pub fn is_strictly_decreasing(&self) -> bool {
        (0..self.snapshot_times.len()).all(|s| {
            self.l1_differences.windows(2).all(|w| {
                let (a, b) = (w[0][s], w[1][s]);
                b < a || (a <= ZERO_FLOOR && b <= ZERO_FLOOR)
            })
        })
    }

    /// Smallest observed order across all levels at snapshot `s`.
    pub fn min_order(&self, s: usize) -> Option<f64> {
        self.observed_orders
            .iter()
            .map(|o| o[s])
            .filter(|o| o.is_finite())
            .fold(None, |m: Option<f64>, o| Some(m.map_or(o, |m| m.min(o))))
    }

    /// Rows `level,t,value` with `level` the cell count `N + 1` of the
    /// coarser grid of each pair.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "level,t,value")?;
        for (m, diffs) in self.l1_differences.iter().enumerate() {
            for (t, d) in self.snapshot_times.iter().zip(diffs) {
                writeln!(w, "{},{:?},{:?}", self.levels[m] + 1, t, d)?;
            }
        }
        Ok(())
    }
}

/// Convert cell counts `N + 1` to `N`, requiring each count to double.
pub fn levels_from_cell_counts(cells: &[usize]) -> Result<Vec<usize>> {
    if cells.len() < 2 {
        return Err(Error::invalid("levels", "need at least two levels"));
    }
    if cells.iter().any(|&c| c < 2) {
        return Err(Error::invalid("levels", "each level needs at least two cells"));
    }
    for w in cells.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::invalid(
                "levels",
                format!("cell counts {} and {} are not nested (need doubling)", w[0], w[1]),
            ));
        }
    }
    Ok(cells.iter().map(|c| c - 1).collect())
}

/// Run `def` at each level (cell counts doubling) and compare consecutive
/// levels at the snapshot times after averaging the finer solution onto
/// the coarser grid. Levels run in parallel.
pub fn refinement_study(def: &ProblemDef, cell_counts: &[usize], t_end: f64, snapshot_times: &[f64]) -> Result<RefinementStudy> {
    let levels = levels_from_cell_counts(cell_counts)?;
    if snapshot_times.is_empty() {
        return Err(Error::invalid("snapshot_times", "need at least one time"));
    }
    let runs: Vec<Result<Vec<GridFunction>>> = levels
        .par_iter()
        .map(|&n| {
            let (problem, cfg) = def.instantiate(n)?;
            let snaps = Snapshots::Times(snapshot_times.to_vec());
            let traj = run(&problem, &cfg, t_end, &snaps)?;
            snapshot_states(&traj, snapshot_times, cfg.dt)
        })
        .collect();
    let runs: Vec<Vec<GridFunction>> = runs.into_iter().collect::<Result<_>>()?;

    let mut diffs = Vec::with_capacity(levels.len() - 1);
    for m in 0..levels.len() - 1 {
        let coarse = &runs[m];
        let fine = &runs[m + 1];
        let row = coarse
            .iter()
            .zip(fine)
            .map(|(c, f)| Ok(l1_distance(c, &restrict(f, c.grid())?)))
            .collect::<Result<Vec<f64>>>()?;
        diffs.push(row);
    }
    let orders = diffs
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a / b).log2()).collect())
        .collect();
    Ok(RefinementStudy {
        levels,
        snapshot_times: snapshot_times.to_vec(),
        l1_differences: diffs,
        observed_orders: orders,
    })
}

/// State in force at each time (left-closed convention).
fn snapshot_states(traj: &Trajectory, times: &[f64], dt: f64) -> Result<Vec<GridFunction>> {
    let last = *traj.steps.last().expect("nonempty trajectory");
    times
        .iter()
        .map(|&t| {
            let n = crate::implicit::steps_until(t, dt).min(last);
            traj.at_step(n)
                .cloned()
                .ok_or_else(|| Error::invalid("snapshot_times", format!("no state stored for t = {t}")))
        })
        .collect()
}

/// Ratios `‖u^n - v^n‖_{L1} / ‖u^0 - v^0‖_{L1}` at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl StabilityResult {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().fold(f64::NEG_INFINITY, |m, &r| m.max(r))
    }

    /// True when every ratio stays below `1 + tol`, i.e. the continuous
    /// bound `‖u(t) - v(t)‖ <= ‖u0 - v0‖ e^{Ct}` holds with `C = 0`.
    pub fn bounded_by_one(&self, tol: f64) -> bool {
        self.ratios.iter().all(|&r| r <= 1.0 + tol)
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.ratios.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// The implied exponent: the scheme admits `C = 0` whenever the ratios
    /// never exceed one.
    pub fn admissible_c(&self, tol: f64) -> Option<f64> {
        self.bounded_by_one(tol).then_some(0.0)
    }
}

/// Evolve two initial states of the same problem and compare them in L1.
pub fn stability_experiment(
    u0: &GridFunction,
    v0: &GridFunction,
    def: &ProblemDef,
    t_end: f64,
) -> Result<StabilityResult> {
    u0.same_grid(v0)?;
    let d0 = l1_distance(u0, v0);
    if d0 == 0.0 {
        return Err(Error::invalid("v0", "initial states are identical; ratio undefined"));
    }
    let n = u0.grid().n();
    let (problem, cfg) = def.instantiate_with(n, u0.clone())?;
    let other = problem.with_initial(v0.clone())?;
    let (a, b) = rayon::join(
        || run(&problem, &cfg, t_end, &Snapshots::EveryStep),
        || run(&other, &cfg, t_end, &Snapshots::EveryStep),
    );
    let (a, b) = (a?, b?);
    let ratios = a.states.iter().zip(&b.states).map(|(u, v)| l1_distance(u, v) / d0).collect();
    Ok(StabilityResult {
        times: a.times.clone(),
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityStudy {
    pub t_end: f64,
    pub mus: Vec<f64>,
    /// L1 distance at `t_end` between the run with each `mu` and `mu = 0`.
    pub distances: Vec<f64>,
}

impl ViscosityStudy {
    /// Distances shrink strictly as `mu` decreases (pairs of exact zeros
    /// also count).
    pub fn is_strictly_decreasing(&self) -> bool {
        self.distances
            .windows(2)
            .all(|w| w[1] < w[0] || (w[0] <= ZERO_FLOOR && w[1] <= ZERO_FLOOR))
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] <= w[0])
    }

    /// Least-squares slope of `log d` against `log mu`.
    pub fn log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .mus
            .iter()
            .zip(&self.distances)
            .filter(|(_, d)| **d > 0.0)
            .map(|(m, d)| (m.ln(), d.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "mu,t,value")?;
        for (m, d) in self.mus.iter().zip(&self.distances) {
            writeln!(w, "{:?},{:?},{:?}", m, self.t_end, d)?;
        }
        Ok(())
    }
}

/// Compare viscous runs against the inviscid run on the `n` grid.
pub fn viscosity_study(def: &ProblemDef, n: usize, mus: &[f64], t_end: f64) -> Result<ViscosityStudy> {
    if mus.is_empty() {
        return Err(Error::invalid("mu", "need at least one viscosity"));
    }
    if mus.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
        return Err(Error::invalid("mu", "viscosities must be positive (mu = 0 is the reference)"));
    }
    if mus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("mu", "viscosities must be strictly decreasing"));
    }
    let (problem, cfg) = def.instantiate(n)?;
    let snaps = Snapshots::Times(vec![t_end]);
    let mut all = vec![0.0];
    all.extend_from_slice(mus);
    let finals: Vec<Result<GridFunction>> = all
        .par_iter()
        .map(|&mu| {
            let vcfg = ViscosityConfig::new(cfg.clone(), mu)?;
            Ok(viscous_run(&problem, &vcfg, t_end, &snaps)?.last().clone())
        })
        .collect();
    let finals: Vec<GridFunction> = finals.into_iter().collect::<Result<_>>()?;
    let distances = finals[1..].iter().map(|u| l1_distance(u, &finals[0])).collect();
    Ok(ViscosityStudy {
        t_end,
        mus: mus.to_vec(),
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{project_initial, CoefficientSource, InitialData, Nonlinearity, TimeStep};
    use crate::properties::mass;

    #[test]
    fn restriction_preserves_mass() {
        let fine = Grid::new(127).unwrap();
        let coarse = Grid::new(63).unwrap();
        let u = project_initial(|x| (9.0 * x).sin() + x * x, &fine).unwrap();
        let r = restrict(&u, &coarse).unwrap();
        assert!((mass(&r) - mass(&u)).abs() < 1e-12);
        assert!(restrict(&u, &Grid::new(64).unwrap()).is_err());
    }

    #[test]
    fn cell_counts_must_double() {
        assert_eq!(levels_from_cell_counts(&[64, 128, 256]).unwrap(), vec![63, 127, 255]);
        assert!(levels_from_cell_counts(&[64, 100]).is_err());
        assert!(levels_from_cell_counts(&[64]).is_err());
    }

    #[test]
    fn constant_data_gives_zero_differences() {
        let def = ProblemDef::new(
            Nonlinearity::clipped_quadratic(),
            CoefficientSource::Constant(1.0),
            InitialData::Constant(0.4),
            TimeStep::PerDx(0.05),
        );
        let s = refinement_study(&def, &[8, 16, 32], 0.02, &[0.01, 0.02]).unwrap();
        assert!(s.l1_differences.iter().flatten().all(|&d| d == 0.0));
        assert!(s.is_strictly_decreasing());
    }

    #[test]
    fn flat_branch_data_gives_zero_differences() {
        let def = ProblemDef::new(
            Nonlinearity::clipped_quadratic(),
            CoefficientSource::Constant(1.0),
            InitialData::Function(std::sync::Arc::new(|x| -1.0 - x)),
            TimeStep::PerDx(0.05),
        );
        let s = refinement_study(&def, &[8, 16, 32], 0.02, &[0.02]).unwrap();
        // u0 < 0 everywhere: nothing moves, and restriction of the projected
        // linear data is exact
        assert!(s.l1_differences.iter().flatten().all(|&d| d < 1e-15), "{:?}", s.l1_differences);
    }

    #[test]
    fn stability_rejects_identical_data() {
        let def = ProblemDef::paper_example();
        let u = project_initial(|x| x, &Grid::new(7).unwrap()).unwrap();
        assert!(stability_experiment(&u, &u, &def, 0.01).is_err());
    }

    #[test]
    fn constant_shift_keeps_ratio_one() {
        let def = ProblemDef::paper_example();
        let g = Grid::new(31).unwrap();
        let u = InitialData::paper_sine().on(&g).unwrap();
        let v = GridFunction::new(g, u.values().iter().map(|x| x + 0.05).collect()).unwrap();
        let r = stability_experiment(&u, &v, &def, 0.01).unwrap();
        assert!(r.ratios.iter().all(|&q| (q - 1.0).abs() < 1e-10));
        let swapped = stability_experiment(&v, &u, &def, 0.01).unwrap();
        for (a, b) in r.ratios.iter().zip(&swapped.ratios) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn viscosity_list_validation() {
        let def = ProblemDef::paper_example();
        assert!(viscosity_study(&def, 15, &[0.0, 0.1], 0.01).is_err());
        assert!(viscosity_study(&def, 15, &[0.01, 0.1], 0.01).is_err());
        assert!(viscosity_study(&def, 15, &[], 0.01).is_err());
    }

    #[test]
    fn csv_rows() {
        let s = ViscosityStudy {
            t_end: 0.1,
            mus: vec![0.1, 0.01],
            distances: vec![0.5, 0.25],
        };
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "mu,t,value\n0.1,0.1,0.5\n0.01,0.1,0.25\n");
        assert!(s.is_strictly_decreasing());
        let slope = ViscosityStudy {
            t_end: 0.1,
            mus: vec![0.1, 0.01],
            distances: vec![1.0, 0.1],
        }
        .log_slope()
        .unwrap();
        assert!((slope - 1.0).abs() < 1e-12);
    }
}
