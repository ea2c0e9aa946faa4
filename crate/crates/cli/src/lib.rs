//! `bilevel-tune`: command-line experiments on top of `bilevel-core`.
//!
//! Four subcommands, each reading one flat TOML configuration document and
//! writing CSV outputs plus a `manifest.json` into the output directory:
//!
//! * `bounds-compare` — a priori vs a posteriori accuracy bounds against a
//!   high-accuracy oracle on a synthetic l1/l2 least-squares instance.
//! * `tune` — the trust-region tuner on digit classification tasks, run with
//!   dynamic certified accuracy and with each configured fixed iteration
//!   count.
//! * `sweep` — `tune` repeated over a grid of starting points, reporting the
//!   spread of the final hyperparameters per accuracy policy.
//! * `validate` — held-out scoring of learned hyperparameters across all ten
//!   digits.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error (partial
//! outputs are flushed before exiting).

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::consumed_certificate_audit;
pub use config::{CliOverrides, ExperimentConfig, ScalePreset};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bilevel-tune",
    version,
    about = "Bilevel hyperparameter tuning with certified lower-level solves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare a priori and a posteriori accuracy bounds against an oracle.
    BoundsCompare(CommonArgs),
    /// Tune hyperparameters under each accuracy policy.
    Tune(CommonArgs),
    /// Repeat tuning over a grid of starting points and report spreads.
    Sweep(CommonArgs),
    /// Score learned hyperparameters on held-out tasks for all ten digits.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Path to the TOML configuration document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the `out_dir` configuration key).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for data shuffles and instance generation.
    #[arg(long)]
    seed: Option<u64>,
    /// Scale preset supplying defaults for keys the document leaves unset.
    #[arg(long, value_enum)]
    scale: Option<ScalePreset>,
}

/// Parse arguments, run the selected subcommand, and return the process exit
/// code. Never panics on user error; all failures map to codes 2 or 3.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let (name, args) = match cli.command {
        Command::BoundsCompare(a) => ("bounds-compare", a),
        Command::Tune(a) => ("tune", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Validate(a) => ("validate", a),
    };
    let overrides = CliOverrides {
        out: args.out.clone(),
        seed: args.seed,
        scale: args.scale,
    };
    let result = config::load(&args.config, &overrides).and_then(|cfg| match name {
        "bounds-compare" => commands::bounds_compare::run(&cfg, &args.config),
        "tune" => commands::tune::run(&cfg, &args.config),
        "sweep" => commands::sweep::run(&cfg, &args.config),
        "validate" => commands::validate::run(&cfg, &args.config),
        _ => unreachable!("subcommand list is closed"),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
