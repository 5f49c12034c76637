//! Command-line front end for consistency verification, confidence scoring
//! and synthetic corpus generation.

mod commands;
mod config;
mod pipeline;

use clap::{Parser, Subcommand};

use crate::config::{RunArgs, RunConfig};

#[derive(Parser)]
#[command(
    name = "concord",
    version,
    about = "Consistency-based verification and confidence scoring for sampled generations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the verified fraction of group splits over a group-count grid
    Verify(RunArgs),
    /// Verification curve plus mean-difference and threshold-ratio summary
    Metrics(RunArgs),
    /// Per-generation confidence scores for every available method
    Score(RunArgs),
    /// AUROC/AUARC of every scoring method over random subsets
    Eval(RunArgs),
    /// Dump the pooled similarity sets behind each hypothesis
    Simdist(RunArgs),
    /// Generate a planted synthetic corpus
    Synth(commands::SynthArgs),
}

fn run_with(args: &RunArgs, f: fn(&RunConfig) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let config = RunConfig::resolve(args)?;
    pipeline::configure_threads(config.threads)?;
    f(&config)
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Verify(args) => run_with(&args, commands::cmd_verify),
        Command::Metrics(args) => run_with(&args, commands::cmd_metrics),
        Command::Score(args) => run_with(&args, commands::cmd_score),
        Command::Eval(args) => run_with(&args, commands::cmd_eval),
        Command::Simdist(args) => run_with(&args, commands::cmd_simdist),
        Command::Synth(args) => commands::cmd_synth(&args),
    }
}

fn main() {
    if let Err(error) = run() {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
