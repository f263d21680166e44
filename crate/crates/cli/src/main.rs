mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "l0fa", version, about = "l0-penalized factor analysis by ADMM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic factor model and its samples.
    #[command(allow_negative_numbers = true)]
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Decompose a sample covariance into L + S.
    #[command(allow_negative_numbers = true)]
    Solve {
        /// Matrix CSV, e.g. sigma_check.csv from `generate`.
        sigma: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Hold-out selection of (C, mu, rho) over the grid.
    #[command(allow_negative_numbers = true)]
    Cv {
        /// Samples CSV, e.g. samples.csv from `generate`.
        samples: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated synthetic trials with summary tables.
    #[command(allow_negative_numbers = true)]
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated step sizes to sweep.
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        /// Comma-separated sample sizes to sweep.
        #[arg(long = "ns", value_delimiter = ',')]
        sample_sizes: Option<Vec<usize>>,
        #[arg(long, value_enum)]
        tuning: Option<TuningArg>,
        /// Run both penalties on the same data.
        #[arg(long, conflicts_with = "penalty")]
        compare: bool,
    },
    /// Check the stationarity conditions for a candidate solution.
    #[command(allow_negative_numbers = true)]
    Check {
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long)]
        l: PathBuf,
        #[arg(long)]
        s: PathBuf,
        #[arg(long)]
        lambda: PathBuf,
        #[arg(long)]
        theta: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// JSON run configuration ("schema": "l0fa/v1").
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub init_rank: Option<usize>,
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,
    /// p = 40, 100 trials, full grid.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PenaltyArg {
    L0,
    L1,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TuningArg {
    Fixed,
    Cv,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("L0FA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::input(format!("L0FA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::internal(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Generate { common } => commands::generate(&common),
        Command::Solve { sigma, common } => commands::solve(&sigma, &common),
        Command::Cv { samples, common } => commands::cv(&samples, &common),
        Command::Montecarlo {
            common,
            trials,
            gammas,
            sample_sizes,
            tuning,
            compare,
        } => commands::montecarlo(
            &common,
            commands::SweepArgs {
                trials,
                gammas,
                sample_sizes,
                tuning,
                compare,
            },
        ),
        Command::Check {
            sigma,
            l,
            s,
            lambda,
            theta,
            common,
        } => commands::check(&common, [&sigma, &l, &s, &lambda, &theta]),
    }
}

fn main() -> ExitCode {
    // usage errors are input errors; clap's own default status would collide with solver failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
