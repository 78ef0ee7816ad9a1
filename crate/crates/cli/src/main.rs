//! `spectra`: config-driven spectral experiments on Finsler metric measure meshes.
//!
//! Exit codes: 0 success, 1 errors (including usage and config parse errors), 2 bound
//! or validation failures and solver convergence failures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] finsler_spectra::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "spectra",
    version,
    about = "Nonlinear spectra of Finsler-Laplacians on meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts; overrides output.dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Relative slack on comparison upper bounds; overrides bounds.slack.
    #[arg(long, global = true)]
    slack: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the spectrum and every configured check.
    Run { config: PathBuf },
    /// Solve on successively refined meshes and estimate convergence orders.
    Converge {
        config: PathBuf,
        #[arg(long)]
        levels: usize,
    },
    /// Solve the spectrum and compare it with the comparison bounds.
    Bounds { config: PathBuf },
    /// Build a complete r-package with its regions and witnesses.
    Pack {
        config: PathBuf,
        #[arg(long)]
        radius: f64,
    },
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let path = match &cli.command {
        Command::Run { config } | Command::Bounds { config } => config,
        Command::Converge { config, .. } | Command::Pack { config, .. } => config,
    };
    if matches!(cli.slack, Some(s) if !(s >= 0.0)) {
        return Err(CliError::Config("--slack must be non-negative".into()));
    }
    let loaded = config::load(path)?;
    let ctx = Context {
        seed: cli.seed.unwrap_or(loaded.config.seed),
        out_dir: loaded.config.output_dir(cli.out_dir.as_deref()),
        slack: cli.slack,
        loaded,
    };
    match &cli.command {
        Command::Run { .. } => commands::run(&ctx),
        Command::Bounds { .. } => commands::bounds(&ctx),
        Command::Converge { levels, .. } => commands::converge(&ctx, *levels),
        Command::Pack { radius, .. } => commands::pack(&ctx, *radius),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("validation failure: {f}");
                }
                ExitCode::from(2)
            }
        }
        Err(CliError::Library(e @ finsler_spectra::Error::Convergence { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
