mod commands;
mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outcome, ENSEMBLE_FILE};
use config::ExperimentConfig;
use error::{CliError, CliResult};

/// Anisotropic Gaussian random fields: simulation, audits and fractal estimators.
///
/// Exit status: 0 on success or PASS, 2 when an audit or estimator reports
/// FAIL, 1 on any error.
#[derive(Debug, Parser)]
#[command(name = "anisogauss", version)]
struct Cli {
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment config, or a manifest written by an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw the ensemble and write it with a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Check a model condition: c1, c2, spectral or truncation.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        which: String,
    },
    /// Run estimators on a stored ensemble: dim, cover, sojourn, lil or smallball.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Only this estimator; all configured ones if absent.
        #[arg(long)]
        which: Option<String>,
        /// Ensemble container; defaults to `<out>/ensemble.agf`.
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
    /// Summarize the reports in a directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> CliResult<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output_dir".into()))?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Simulate { common } => {
            let (cfg, out) = load(&common)?;
            commands::simulate(&cfg, &out)
        }
        Command::Audit { common, which } => {
            let (cfg, out) = load(&common)?;
            commands::audit(&cfg, &which, &out)
        }
        Command::Analyze {
            common,
            which,
            ensemble,
        } => {
            let (cfg, out) = load(&common)?;
            let ensemble = ensemble.unwrap_or_else(|| out.join(ENSEMBLE_FILE));
            commands::analyze(&cfg, Path::new(&ensemble), which.as_deref(), &out)
        }
        Command::Report { out } => {
            let (outcome, text) = commands::report(&out)?;
            print!("{text}");
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
