//! `bombtest` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or flag error, 3 I/O error,
//! 4 internal invariant breach (including a failed `verify`).

mod commands;
pub mod config;
pub mod format;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{analyze_run, RunManifest};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, err: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bombtest",
    version,
    about = "Interaction-free measurement and Leggett-Garg test simulator"
)]
pub struct Cli {
    /// Worker threads for shot sampling and resampling (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// π/2 Leggett-Garg campaign over a grid of wait times.
    LgSweep(RunArgs),
    /// Dichotomic π/3 campaign with the three two-time correlators.
    Dichotomic(RunArgs),
    /// Closed-form and Monte Carlo figures of merit of the bomb tester.
    Bombtest(BombArgs),
    /// Recompute the summary of an output directory from its raw records.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides `seed` from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `shots_per_arm` from the config file.
    #[arg(long)]
    pub shots: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BombArgs {
    /// Probability of the first splitter sending the photon into branch B.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    /// Interferometer contrast for the dud.
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,
    /// Round budget for repeated testing.
    #[arg(long, default_value_t = 1000)]
    pub rounds: u64,
    /// Number of Zeno cycles.
    #[arg(long, default_value_t = 5)]
    pub zeno: u32,
    /// Monte Carlo shots per quantity.
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the table to this directory as `bombtest.csv`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("flag `--threads`: must be >= 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match cli.command {
        Command::LgSweep(args) => commands::cmd_run(commands::RunKind::LgSweep, &args),
        Command::Dichotomic(args) => commands::cmd_run(commands::RunKind::Dichotomic, &args),
        Command::Bombtest(args) => commands::cmd_bombtest(&args),
        Command::Verify(args) => commands::cmd_verify(&args),
    }
}
