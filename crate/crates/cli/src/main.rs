//! `omckit`: simulate, fit and tabulate cryogenic optomechanics experiments.
//!
//! Exit codes: 0 on success (a fit that did not converge is still a
//! result), 2 for invalid configuration or input, 3 for I/O failures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::fit::FitMode;
use commands::plotdata::Figure;
use config::{Format, Overrides, RunConfig};
use error::{CliError, CliResult};
use omckit::parallel::Execution;

#[derive(Parser, Debug)]
#[command(name = "omckit", version, about = "Optomechanical thermometry: synthesis, fitting and plot data")]
struct Cli {
    /// Run configuration (JSON). Defaults apply to every missing section.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides OMCKIT_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for all synthetic noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and batch fits.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output formats, e.g. `csv` or `csv,svg`.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize cooling curves, asymmetries and (optionally) spectra.
    Simulate,
    /// Fit spectra or tabulated series. Inputs are files or bundle directories.
    Fit {
        #[arg(long, value_enum)]
        mode: FitMode,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Tabulate the continuum-bath damping rate and its asymptotes.
    Phonon,
    /// Export the curves behind one figure from simulate/fit bundles.
    Plotdata {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Bundle directory; repeat to combine simulate and fit outputs.
        #[arg(long = "bundle", required = true)]
        bundles: Vec<PathBuf>,
    },
}

fn execute(cli: &Cli) -> CliResult<()> {
    let ov = Overrides { out: cli.out.clone(), seed: cli.seed, formats: cli.format.clone() };
    let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
    let exec = Execution::Parallel;
    let report = match &cli.command {
        Command::Simulate => commands::simulate::run(&cfg, exec)?,
        Command::Fit { mode, inputs } => commands::fit::run(&cfg, *mode, inputs, exec)?,
        Command::Phonon => commands::phonon::run(&cfg)?,
        Command::Plotdata { figure, bundles } => commands::plotdata::run(&cfg, *figure, bundles)?,
    };
    log::info!("wrote {} tables to {}", report.tables.len(), cfg.outputs.directory.display());
    println!("{}", cfg.outputs.directory.join(report::REPORT_FILE).display());
    Ok(())
}

#[cfg(feature = "parallel")]
fn with_workers(workers: Option<usize>, f: impl FnOnce() -> CliResult<()> + Send) -> CliResult<()> {
    match workers {
        Some(0) => Err(CliError::validation("--workers must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::validation(format!("cannot start {n} workers: {e}")))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_workers(workers: Option<usize>, f: impl FnOnce() -> CliResult<()> + Send) -> CliResult<()> {
    match workers {
        Some(0) => Err(CliError::validation("--workers must be >= 1")),
        Some(n) if n > 1 => {
            log::warn!("built without the `parallel` feature: --workers {n} ignored");
            f()
        }
        _ => f(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match with_workers(cli.workers, || execute(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
