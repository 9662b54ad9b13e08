//! Binary entry point: argument parsing, dispatch, and exit-code mapping.
//!
//! Exit codes: 0 success, 2 validation (clap usage errors included),
//! 3 convergence, 4 insufficient sample, 5 I/O.

use std::error::Error as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rfpca_cli::{
    cmd_breakdown, cmd_fpca, cmd_ingest, cmd_median, cmd_simulate, CliResult, Overrides,
};

#[derive(Parser)]
#[command(
    name = "rfpca",
    version,
    about = "Robust functional PCA for metric-space trajectory samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise Fréchet median trajectory of a trajectory sample.
    Median {
        /// Trajectory CSV (with its JSON sidecar next to it).
        #[arg(long)]
        input: PathBuf,
        /// Directory receiving center.csv (+ sidecar) and report.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Full pipeline: center, distances, covariance, spectrum, scores.
    Fpca {
        /// Trajectory CSV (with its JSON sidecar next to it).
        #[arg(long)]
        input: PathBuf,
        /// Directory receiving eigenfunctions.csv, scores.csv,
        /// spectrum.csv, and report.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Estimator: wpu, spatial-sign, classical, or dm.
        #[arg(long)]
        method: Option<String>,
        /// Winsorization quantile level in (0, 1].
        #[arg(long)]
        psi: Option<f64>,
        /// Retained component count (overrides threshold selection).
        #[arg(long)]
        components: Option<usize>,
    },
    /// Generate a synthetic trajectory sample, optionally contaminated.
    Simulate {
        /// Directory receiving sample.csv (+ sidecar), outliers.csv when
        /// contaminated, and report.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Contamination-response curves across outlier fractions.
    Breakdown {
        /// Directory receiving curves.csv and report.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Experiment master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Winsorization quantile level in (0, 1].
        #[arg(long)]
        psi: Option<f64>,
    },
    /// Bin timestamped event records into Laplacian trajectories.
    Ingest {
        /// Events CSV with header timestamp,origin,destination.
        #[arg(long)]
        events: PathBuf,
        /// Directory receiving sample.csv (+ sidecar) and report.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Configuration file; must set the [ingest] node universe.
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Median {
            input,
            out_dir,
            config,
        } => cmd_median(&input, &out_dir, config.as_deref()),
        Command::Fpca {
            input,
            out_dir,
            config,
            method,
            psi,
            components,
        } => cmd_fpca(
            &input,
            &out_dir,
            config.as_deref(),
            &Overrides {
                method,
                psi,
                components,
                seed: None,
            },
        ),
        Command::Simulate {
            out_dir,
            config,
            seed,
        } => cmd_simulate(
            &out_dir,
            config.as_deref(),
            &Overrides {
                seed,
                ..Overrides::default()
            },
        ),
        Command::Breakdown {
            out_dir,
            config,
            seed,
            psi,
        } => cmd_breakdown(
            &out_dir,
            config.as_deref(),
            &Overrides {
                seed,
                psi,
                ..Overrides::default()
            },
        ),
        Command::Ingest {
            events,
            out_dir,
            config,
        } => cmd_ingest(&events, &out_dir, Some(&config)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(written) => {
            for path in &written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = err.source();
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
