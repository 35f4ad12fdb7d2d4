//! `relpend`: numerics for the periodically forced relativistic pendulum.
//!
//! Every subcommand reads one JSON configuration document (see the README
//! for the schema) and writes deterministic CSV/JSONL files. Exit codes:
//! 0 success, 1 verify failure, 2 inadmissible parameters, 3 convergence or
//! runtime failure, 64 usage/config error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::RunConfig;

/// A command failure carrying its exit code. An empty message means the
/// command already printed its diagnosis.
#[derive(Debug)]
pub struct CmdError {
    pub code: u8,
    pub message: String,
}

impl CmdError {
    pub fn usage(message: String) -> Self {
        Self { code: 64, message }
    }

    pub fn runtime(message: String) -> Self {
        Self { code: 3, message }
    }

    pub fn verify(message: String) -> Self {
        Self { code: 1, message }
    }

    pub fn silent(code: u8) -> Self {
        Self {
            code,
            message: String::new(),
        }
    }
}

impl From<relpend::Error> for CmdError {
    fn from(e: relpend::Error) -> Self {
        let code = match &e {
            relpend::Error::Inadmissible { .. } => 2,
            relpend::Error::InvalidParams(_) => 64,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "relpend",
    version,
    about = "Poincaré-map tools for the periodically forced relativistic pendulum"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the configured RNG seed (verify suites).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the sweep worker count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report admissibility, the twist threshold and the strip bound.
    Check,
    /// Integrate one trajectory and write trajectory.csv.
    Simulate,
    /// Evaluate the return map on a grid and write poincare_grid.csv.
    PoincareGrid,
    /// Locate periodic orbits (or the degenerate continuum); writes orbits.jsonl.
    FindPeriodic,
    /// Twist margin, boundary twist and optional curve intersections; writes twist.json.
    TwistMap,
    /// Scan the unforced pendulum's energy levels; writes autonomous.csv.
    Autonomous,
    /// Run a list of (a, T, N, forcing-scale) cases; writes sweep.csv.
    Sweep,
    /// Run the invariant suites against the configured tolerances.
    Verify,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if !err.message.is_empty() {
                eprintln!("error: {}", err.message);
            }
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CmdError> {
    let path = cli
        .config
        .ok_or_else(|| CmdError::usage("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.sweep.jobs = jobs;
    }
    match cli.command {
        Command::Check => commands::cmd_check(&cfg),
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::PoincareGrid => commands::cmd_poincare_grid(&cfg),
        Command::FindPeriodic => commands::cmd_find_periodic(&cfg),
        Command::TwistMap => commands::cmd_twist_map(&cfg),
        Command::Autonomous => commands::cmd_autonomous(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Verify => commands::cmd_verify(&cfg),
    }
}
