//! `align-lab`: degree-of-freedom bounds, explicit alignment constructions
//! and feasibility experiments for K-user interference channels.

mod commands;
mod error;
mod spec;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::spec::{Command, ExperimentSpec, Format, IntRange};

#[derive(Parser)]
#[command(name = "align-lab", version, about = "Interference-alignment bounds, constructions and feasibility experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// System config or experiment spec (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Bound A, Bound B and TDMA tables, or counts for one config.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long = "k")]
        users: Option<IntRange>,
        #[arg(long)]
        n: Option<IntRange>,
        #[arg(long = "m")]
        antennas: Option<IntRange>,
    },
    /// Time-extension scheme parameters over a K x n sweep.
    CjParams {
        #[command(flatten)]
        common: Common,
        #[arg(long = "k")]
        users: Option<IntRange>,
        #[arg(long)]
        n: Option<IntRange>,
    },
    /// Smallest n at which the time-extension configuration is improper.
    Contradiction {
        #[command(flatten)]
        common: Common,
        #[arg(long = "k")]
        users: Option<IntRange>,
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// Explicit three-user construction, verified.
    Cj3 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<IntRange>,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Random-beam probe of the channel solution space.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Monte Carlo leakage minimization and feasibility verdict.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol_align: Option<f64>,
    },
    /// Check a decoder/precoder pair against channels.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        channels: Option<PathBuf>,
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Fix the gauge before checking.
        #[arg(long)]
        normalize: bool,
    },
    /// Write the gauge-fixed alignment equations as a polynomial system.
    ExportPoly {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        channels: Option<PathBuf>,
    },
}

fn base_spec(command: Command, common: &Common) -> Result<ExperimentSpec, CliError> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ExperimentSpec::from_config_file(command, &text)?
        }
        None => ExperimentSpec::new(command),
    };
    if common.out.is_some() {
        spec.output.path.clone_from(&common.out);
    }
    if let Some(f) = common.format {
        spec.output.format = f;
    }
    if common.seed.is_some() {
        spec.params.seed = common.seed;
    }
    Ok(spec)
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn build_spec(sub: Sub) -> Result<ExperimentSpec, CliError> {
    let spec = match sub {
        Sub::Bounds { common, users, n, antennas } => {
            let mut s = base_spec(Command::Bounds, &common)?;
            set(&mut s.sweep.users, users);
            set(&mut s.sweep.n, n);
            set(&mut s.sweep.antennas, antennas);
            s
        }
        Sub::CjParams { common, users, n } => {
            let mut s = base_spec(Command::CjParams, &common)?;
            set(&mut s.sweep.users, users);
            set(&mut s.sweep.n, n);
            s
        }
        Sub::Contradiction { common, users, n_max } => {
            let mut s = base_spec(Command::Contradiction, &common)?;
            set(&mut s.sweep.users, users);
            set(&mut s.params.n_max, n_max);
            s
        }
        Sub::Cj3 { common, n, seeds } => {
            let mut s = base_spec(Command::Cj3, &common)?;
            set(&mut s.sweep.n, n);
            set(&mut s.params.seeds, seeds);
            s
        }
        Sub::Probe { common, draws } => {
            let mut s = base_spec(Command::Probe, &common)?;
            set(&mut s.params.draws, draws);
            s
        }
        Sub::Solve {
            common,
            trials,
            restarts,
            max_iters,
            tol_align,
        } => {
            let mut s = base_spec(Command::Solve, &common)?;
            set(&mut s.params.trials, trials);
            set(&mut s.params.restarts, restarts);
            set(&mut s.params.max_iters, max_iters);
            set(&mut s.params.tol_align, tol_align);
            s
        }
        Sub::Verify {
            common,
            channels,
            solution,
            normalize,
        } => {
            let mut s = base_spec(Command::Verify, &common)?;
            set(&mut s.params.channels, channels);
            set(&mut s.params.solution, solution);
            s.params.normalize |= normalize;
            s
        }
        Sub::ExportPoly { common, channels } => {
            let mut s = base_spec(Command::ExportPoly, &common)?;
            set(&mut s.params.channels, channels);
            s
        }
    };
    Ok(spec)
}

fn execute(sub: Sub) -> Result<(), CliError> {
    let spec = build_spec(sub)?;
    let report = commands::run(&spec)?;
    let body = report.render(spec.output.format)?;
    match &spec.output.path {
        Some(path) => fs::write(path, body).map_err(|e| CliError::io(path, e))?,
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e))?,
    }
    match report.failure {
        Some(msg) => Err(CliError::CheckFailed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("align-lab: {e}");
            e.exit_code()
        }
    }
}
