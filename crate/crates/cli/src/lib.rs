//! Command-line front end: problem files, runs, property audits and studies.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 solver
//! failure, 4 failed property or study assertion.

pub mod commands;
pub mod files;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use degdiff_core::config::RunSpec;

pub use commands::{
    cmd_converge, cmd_run, cmd_verify, cmd_verify_trajectory, cmd_viscosity, RunManifest, SnapshotEntry,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("failed checks: {}", .0.join(", "))]
    Property(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Property(_) => 4,
        }
    }
}

impl From<degdiff_core::Error> for CliError {
    fn from(e: degdiff_core::Error) -> Self {
        if e.is_solver_failure() {
            CliError::Solver(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "degdiff", version, about = "Implicit solver for degenerate nonlinear diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Problem definition file (JSON).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Embedded problem: paper-example or heat.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Newton tolerance: a number (relative) or `paper` (absolute 0.1 dx²).
    #[arg(long, value_name = "X")]
    pub newton_tol: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Advance the problem and write snapshots, functionals and a manifest.
    Run {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Also write every state to trajectory.json.
        #[arg(long)]
        save_trajectory: bool,
    },
    /// Check every discrete estimate and write report.csv.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Seed of the perturbed companion run used for L1 contraction.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Audit a saved trajectory instead of running the solver.
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
    /// Grid refinement study; levels are cell counts that double.
    Converge {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
        levels: Vec<usize>,
    },
    /// Distance of viscous runs to the inviscid run.
    Viscosity {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
        mu: Vec<f64>,
    },
    /// Write a preset's problem file and run it.
    Example {
        #[arg(long, default_value = "paper-example")]
        preset: String,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "X")]
        newton_tol: Option<String>,
    },
}

/// Resolve `--config` / `--preset` and apply `--newton-tol`.
pub fn load_spec(config: Option<&Path>, preset: Option<&str>, newton_tol: Option<&str>) -> Result<RunSpec, CliError> {
    let mut spec = match (config, preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(files::io_err(path))?;
            RunSpec::from_json(&text)?
        }
        (None, Some(name)) => RunSpec::preset(name)?,
        (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
        (Some(_), Some(_)) => return Err(CliError::Config("--config and --preset are exclusive".into())),
    };
    if let Some(tol) = newton_tol {
        spec.set_newton_tol(tol)?;
    }
    Ok(spec)
}

fn spec_of(p: &ProblemArgs) -> Result<RunSpec, CliError> {
    load_spec(p.config.as_deref(), p.preset.as_deref(), p.newton_tol.as_deref())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            problem,
            out,
            save_trajectory,
        } => {
            let manifest = cmd_run(&spec_of(&problem)?, &out, save_trajectory)?;
            println!("{} steps, {} snapshots written to {}", manifest.steps, manifest.snapshots.len(), out.display());
        }
        Command::Verify {
            problem,
            out,
            seed,
            trajectory,
        } => {
            let spec = spec_of(&problem)?;
            let reports = match trajectory {
                Some(path) => cmd_verify_trajectory(&spec, &path, &out)?,
                None => cmd_verify(&spec, &out, seed)?,
            };
            println!("{} checks passed", reports.len());
        }
        Command::Converge { problem, out, levels } => {
            let study = cmd_converge(&spec_of(&problem)?, &levels, &out)?;
            for (s, t) in study.snapshot_times.iter().enumerate() {
                match study.min_order(s) {
                    Some(order) => println!("t = {t}: minimum observed order {order:.3}"),
                    None => println!("t = {t}: no observed order"),
                }
            }
        }
        Command::Viscosity { problem, out, mu } => {
            let study = cmd_viscosity(&spec_of(&problem)?, &mu, &out)?;
            if let Some(slope) = study.log_slope() {
                println!("log-log slope {slope:.3}");
            }
        }
        Command::Example { preset, out, newton_tol } => {
            let spec = load_spec(None, Some(&preset), newton_tol.as_deref())?;
            files::ensure_dir(&out)?;
            files::write_file(&out, "config.json", |w| {
                use std::io::Write;
                writeln!(w, "{}", spec.config.to_json_pretty())
            })?;
            let manifest = cmd_run(&spec, &out, false)?;
            println!("{} steps, {} snapshots written to {}", manifest.steps, manifest.snapshots.len(), out.display());
        }
    }
    Ok(())
}

/// Parse `args`, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
