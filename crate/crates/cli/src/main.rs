use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod check;
mod manifest;
mod report;
mod sweep;

#[derive(Parser)]
#[command(name = "hadamard", version, about = "Hadamard instability experiments for initially elliptic systems")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path or prefix, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random property-test corpora; recorded in the manifest.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derive c0 and c1 and write the constants file.
    DeriveConstants {
        #[arg(long, default_value_t = 100_000)]
        k_max: u64,
        #[arg(long, default_value_t = 10_000)]
        n_max: u64,
    },
    /// Run the assumption checks on a model and print its Gevrey ceiling.
    CheckSymbol {
        /// Built-in name or file:<path>.
        model: String,
        #[arg(long)]
        json: bool,
    },
    /// Run the full pipeline for every ε of a config.
    Sweep {
        config: PathBuf,
        /// JSON constants file (defaults to the bundled one).
        #[arg(long)]
        constants: Option<PathBuf>,
        /// Ignore an existing manifest and recompute every row.
        #[arg(long)]
        fresh: bool,
    },
    /// Monotonicity verdicts and fitted exponents for a sweep CSV.
    Report {
        csv: PathBuf,
        /// Growth rate the growth_fit column is compared against.
        #[arg(long, default_value_t = 1.0)]
        gamma0: f64,
        #[arg(long)]
        json: bool,
    },
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn io(context: &str, e: impl std::fmt::Display) -> Self {
        Failure { code: 1, message: format!("{context}: {e}") }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 5, message: message.into() }
    }
}

impl From<hadamard_core::Error> for Failure {
    fn from(e: hadamard_core::Error) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("--threads: {e}")))?;
    }
    match cli.cmd {
        Cmd::DeriveConstants { k_max, n_max } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("constants.json"));
            check::derive_constants(&out, k_max, n_max)
        }
        Cmd::CheckSymbol { model, json } => check::check_symbol(&model, json),
        Cmd::Sweep { config, constants, fresh } => {
            sweep::sweep(&config, constants.as_deref(), cli.out.as_deref(), cli.seed, fresh)
        }
        Cmd::Report { csv, gamma0, json } => report::report(&csv, gamma0, json),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
