use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cellgamma_cli::config::{Overrides, Subcommand};
use cellgamma_cli::run::run_config;

/// Cell-problem interfacial energies from a JSON run configuration.
#[derive(Debug, Parser)]
#[command(name = "cellgamma", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// JSON run configuration (optional for `catalog`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random starts and samples.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "CELLGAMMA_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let ov = Overrides {
        out: args.out,
        seed: args.seed,
        threads: args.threads,
    };
    let status = run_config(args.subcommand, args.config.as_deref(), &ov);
    ExitCode::from(status.code() as u8)
}
