use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netshock::{run_command, Command, RunConfig};

#[derive(Parser)]
#[command(name = "netshock", version, about = "Global-bank net-worth shock toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split event surprises into supply and demand components and aggregate them.
    Decompose(Flags),
    /// Solve the bank equilibrium over a net-worth sweep.
    SimulateModel(Flags),
    /// Write a synthetic dataset with its ground truth.
    GenSynth(Flags),
    /// Pooled or group-mean panel BVAR impulse responses.
    Var(Flags),
    /// Panel local projections.
    Lp(Flags),
    /// Instrumented panel local projections.
    Ivlp(Flags),
    /// Loan-level interaction regressions with absorbed fixed effects.
    Micro(Flags),
    /// Run the acceptance suite.
    Validate(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::Decompose(f) => (Command::Decompose, f),
        Cmd::SimulateModel(f) => (Command::SimulateModel, f),
        Cmd::GenSynth(f) => (Command::GenSynth, f),
        Cmd::Var(f) => (Command::Var, f),
        Cmd::Lp(f) => (Command::Lp, f),
        Cmd::Ivlp(f) => (Command::Ivlp, f),
        Cmd::Micro(f) => (Command::Micro, f),
        Cmd::Validate(f) => (Command::Validate, f),
    };
    let mut config = match &flags.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(out) = flags.out {
        config.out = out;
    }
    if flags.threads.is_some() {
        config.threads = flags.threads;
    }
    match run_command(command, &config) {
        Ok(m) => {
            eprintln!("{}: {} artifacts in {} ({:.2} s)", command, m.artifacts.len(), config.out.display(), m.wall_time_s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
