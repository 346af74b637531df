//! Command-line front end for the spatial cylindrical copula model.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure.

mod commands;
mod manifest;
mod plot;

use clap::{Parser, Subcommand};
use pwc_core::config::RunConfig;
use pwc_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pwc",
    about = "Spatial cylindrical copula regression: simulate, fit, select, score, plot",
    version
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Snap prediction sites outside the mesh hull to the nearest node
    /// instead of failing.
    #[arg(long, global = true)]
    snap_outside_hull: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets with ground-truth sidecars.
    Simulate {
        /// Number of replications.
        #[arg(long, default_value_t = 1)]
        replications: usize,
    },
    /// Two-stage fit of the configured model to a dataset.
    Fit {
        /// Dataset CSV; overrides data.path from the configuration.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Rank previously fitted models of one dataset by DIC and WAIC.
    Select {
        /// Fit output directories to compare (repeatable).
        #[arg(long = "fit", required = true)]
        fits: Vec<PathBuf>,
    },
    /// Cross-validated predictive scores against an independence baseline.
    Score {
        /// Dataset CSV; overrides data.path from the configuration.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Render SVG plots from the outputs in --out.
    Plot,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Data(_) | Error::MeshParse(_) | Error::Io(_) | Error::SiteOutsideHull { .. } => 3,
        Error::DegenerateTriangle { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::InvalidArgument(_)
        | Error::Calibration(_) => 4,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::parse("")?,
    };
    let seed = cli.seed.unwrap_or(cfg.mcmc.seed);
    match &cli.command {
        Command::Simulate { replications } => {
            commands::cmd_simulate(&cfg, &cli.out, seed, *replications)
        }
        Command::Fit { data } => commands::cmd_fit(
            &cfg,
            data.as_deref(),
            &cli.out,
            seed,
            cli.snap_outside_hull,
        ),
        Command::Select { fits } => commands::cmd_select(fits, &cli.out),
        Command::Score { data } => commands::cmd_score(&cfg, data.as_deref(), &cli.out, seed),
        Command::Plot => commands::cmd_plot(&cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
