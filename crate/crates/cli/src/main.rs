use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracplane::{exit_code, run, Phase, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "fracplane", version, about = "Fractional reaction-diffusion runs with moving-plane symmetry checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Random seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the operator and write operator.bin.
    Assemble(Common),
    /// Time-step from operator.bin and write trajectory.csv.
    Simulate(Common),
    /// Monitor the reflection differences over the plane grid.
    Sweep(Common),
    /// Omega-limit symmetry, boundary growth and Holder checks.
    Verify(Common),
    /// Regenerate summary.txt from verdicts.csv.
    Report(Common),
    /// All of the above.
    Run(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (phase, common) = match cli.command {
        Command::Assemble(c) => (Phase::Assemble, c),
        Command::Simulate(c) => (Phase::Simulate, c),
        Command::Sweep(c) => (Phase::Sweep, c),
        Command::Verify(c) => (Phase::Verify, c),
        Command::Report(c) => (Phase::Report, c),
        Command::Run(c) => (Phase::Run, c),
    };
    let opts = RunOptions { out: common.out, threads: common.threads, seed: common.seed };
    let result = RunConfig::load(&common.config).and_then(|cfg| run::execute(phase, &cfg, &opts));
    match &result {
        Ok(summary) => print!("{}", summary.text),
        Err(e) => eprintln!("fracplane: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
