//! `dtnlab`: forward maps, scattering amplitudes, reconstructions and
//! stability sweeps from strict JSON configs.
//!
//! Exit codes: 0 when every requested check passed, 1 when a check failed,
//! 2 on configuration, I/O or numerical errors.

mod checks;
mod commands;
mod config;
mod staging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lab(#[from] dtnlab::LabError),

    #[error("cannot read {0}: {1}")]
    Read(PathBuf, std::io::Error),

    #[error("output directory {0} does not exist")]
    MissingOutput(PathBuf),

    #[error("artifact {0} was not produced")]
    Incomplete(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Parser)]
#[command(name = "dtnlab", version, about = "Inverse boundary value problem laboratory")]
struct Cli {
    /// Worker threads (overrides the config's `threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and store DtN maps for the configured potentials.
    Forward(Io),
    /// Scattering amplitudes by the direct and the boundary-reduction routes.
    Scatter(Io),
    /// Born reconstruction from DtN data with the cutoff rule.
    Reconstruct(Io),
    /// Stability sweep over an amplitude ladder, with the bound ledger.
    Sweep(Io),
    /// Run the closed-form invariant suite.
    Selftest {
        /// Also write selftest.json into this existing directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct Io {
    /// JSON config file.
    #[arg(long, short)]
    config: PathBuf,
    /// Existing output directory.
    #[arg(long, short)]
    out: PathBuf,
}

/// `threads` from the config file, read leniently; the command itself
/// validates the file strictly.
fn config_threads(path: &std::path::Path) -> Option<usize> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get("threads")?.as_u64().map(|t| t as usize)
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    let threads = cli.threads.or(match &cli.command {
        Command::Forward(io) | Command::Scatter(io) | Command::Reconstruct(io) | Command::Sweep(io) => {
            config_threads(&io.config)
        }
        Command::Selftest { .. } => None,
    });
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Forward(io) => commands::forward(&io.config, &io.out),
        Command::Scatter(io) => commands::scatter(&io.config, &io.out),
        Command::Reconstruct(io) => commands::reconstruct_cmd(&io.config, &io.out),
        Command::Sweep(io) => commands::sweep(&io.config, &io.out),
        Command::Selftest { out } => commands::selftest(out.as_deref()),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(o) if o.passed => {
            println!("{}", o.summary);
            ExitCode::SUCCESS
        }
        Ok(o) => {
            eprintln!("checks failed: {}", o.summary);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
