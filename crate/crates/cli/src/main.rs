//! `pbkg`: fit paired source/background count data, compute reference moments
//! and effective degrees of freedom, and run simulation grids.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poisson_bkg::FitMethod;

use crate::error::CliError;

/// Version of the JSON documents written by every command.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "pbkg", version, about = "Poisson source + background fitting and simulation")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "PBKG_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a dataset (CSV with columns x,S,B) and print the outcome as JSON.
    Fit(FitArgs),
    /// Run a simulation grid from a TOML or JSON config.
    Simulate(SimulateArgs),
    /// Expectation and variance of the fit statistic.
    Moments(MomentsArgs),
    /// Monte Carlo effective degrees of freedom for a constant parent.
    Df(DfArgs),
}

#[derive(Debug, Args)]
struct ExposureArgs {
    /// Source exposure t_S.
    #[arg(long = "ts", default_value_t = 1.0)]
    ts: f64,
    /// Background exposure t_B.
    #[arg(long = "tb", default_value_t = 1.0)]
    tb: f64,
}

#[derive(Debug, Args)]
struct SettingsArgs {
    /// Absolute tolerance on the source parameter.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Objective evaluations per search.
    #[arg(long, default_value_t = 500)]
    max_evals: usize,
    /// Let the fixed-background estimate go negative when every background bin is non-empty.
    #[arg(long)]
    allow_negative_fixed: bool,
}

impl SettingsArgs {
    fn settings(&self) -> poisson_bkg::OptimizerSettings {
        poisson_bkg::OptimizerSettings {
            abs_tol_theta: self.tol,
            max_evaluations: self.max_evals,
            fixed_nonnegative: !self.allow_negative_fixed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dataset CSV; omit when reading from --samples.
    #[arg(required_unless_present = "samples")]
    data: Option<PathBuf>,
    #[arg(long, short, default_value = "wstat")]
    method: FitMethod,
    #[command(flatten)]
    exposures: ExposureArgs,
    #[command(flatten)]
    settings: SettingsArgs,
    /// Samples file written by `simulate --keep-samples`.
    #[arg(long, conflicts_with = "data", requires = "realization")]
    samples: Option<PathBuf>,
    /// Realization index within the samples file.
    #[arg(long)]
    realization: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Output directory.
    #[arg(long, short, default_value = "pbkg-out")]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the realizations per cell.
    #[arg(long)]
    m: Option<usize>,
    /// Override the df replicates per cell (0 skips df).
    #[arg(long)]
    replicates: Option<usize>,
    /// Write every dataset and fit outcome per cell as JSON.
    #[arg(long)]
    keep_samples: bool,
    /// Write eCDF CSVs of the statistic and the source estimate per cell and method.
    #[arg(long)]
    ecdf: bool,
    /// Also write each eCDF as an SVG plot (implies --ecdf).
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct MomentsArgs {
    /// Parent bin means (repeat or comma-separate).
    #[arg(long, value_delimiter = ',', conflicts_with = "data")]
    mu: Vec<f64>,
    /// Number of bins sharing a single --mu value.
    #[arg(long)]
    bins: Option<usize>,
    /// Degrees of freedom subtracted from the expectation.
    #[arg(long)]
    df: Option<f64>,
    /// Observed statistic for a z-score.
    #[arg(long)]
    observed: Option<f64>,
    /// Dataset CSV; the fitted means become the parent means.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, short, default_value = "wstat")]
    method: FitMethod,
    #[command(flatten)]
    exposures: ExposureArgs,
}

#[derive(Debug, Args)]
struct DfArgs {
    #[arg(long, short, default_value = "wstat")]
    method: FitMethod,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, short, default_value_t = 100)]
    n: usize,
    /// Replicate datasets.
    #[arg(long, short, default_value_t = 1000)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    exposures: ExposureArgs,
    /// Also measure the optimism on independent datasets.
    #[arg(long)]
    verify: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result: Result<(), CliError> = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Moments(a) => commands::moments(a),
        Command::Df(a) => commands::df(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
