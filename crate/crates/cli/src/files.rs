//! CSV and JSON artifacts written by the commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use degdiff_core::{Grid, GridFunction, Trajectory};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SNAPSHOT_HEADER: &str = "x_center,u";
pub const FUNCTIONALS_HEADER: &str = "t,mass,l1,l2,linf_min,linf_max,bv,dissipation_increment";

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Create `dir/name` and hand a buffered writer to `body`.
pub(crate) fn write_file<F>(dir: &Path, name: &str, body: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    Ok(path)
}

pub(crate) fn write_snapshot<W: Write>(w: &mut W, u: &GridFunction) -> std::io::Result<()> {
    writeln!(w, "{SNAPSHOT_HEADER}")?;
    let grid = u.grid();
    for (j, v) in u.values().iter().enumerate() {
        writeln!(w, "{:?},{:?}", grid.center(j), v)?;
    }
    Ok(())
}

/// Every stored state of a run, as written by `run --save-trajectory`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub n: usize,
    pub dt: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Tolerance the property checks should apply to this trajectory.
    pub tolerance: f64,
    pub states: Vec<Vec<f64>>,
}

impl TrajectoryFile {
    pub fn from_trajectory(traj: &Trajectory, tolerance: f64) -> Self {
        TrajectoryFile {
            n: traj.grid.n(),
            dt: traj.dt,
            lambda: traj.lambda,
            mu: traj.mu,
            tolerance,
            states: traj.states.iter().map(|s| s.values().to_vec()).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("trajectory file {}: {e}", path.display())))
    }

    pub fn to_trajectory(&self) -> Result<Trajectory, CliError> {
        let bad = |e: degdiff_core::Error| CliError::Config(format!("trajectory file: {e}"));
        let grid = Grid::new(self.n).map_err(bad)?;
        let states = self
            .states
            .iter()
            .map(|v| GridFunction::new(grid, v.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        Trajectory::from_states(states, self.dt, self.lambda, self.mu).map_err(bad)
    }
}
