use clap::{Args, Parser, Subcommand};
use nsfde::run::{run, Command, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulation and stability analysis for neutral stochastic delay equations
/// driven by fractional Brownian motion and compensated Poisson jumps.
#[derive(Parser)]
#[command(name = "nsfde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Run the Monte Carlo moment estimation and fit the decay rate.
    Simulate(CommonArgs),
    /// Evaluate the contraction/stability certificate.
    Certify(CommonArgs),
    /// Sample a scalar fractional-noise ensemble and dump it as CSV.
    GenNoise(CommonArgs),
    /// Run the built-in property suites and the preset oracles.
    SelfTest(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's outputs.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for the Monte Carlo layer.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 guarantees serial execution, 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        CliCommand::Simulate(a) => (Command::Simulate, a),
        CliCommand::Certify(a) => (Command::Certify, a),
        CliCommand::GenNoise(a) => (Command::GenNoise, a),
        CliCommand::SelfTest(a) => (Command::SelfTest, a),
    };
    let opts = RunOptions {
        config: args.config,
        out: args.out,
        seed: args.seed,
        threads: args.threads,
    };
    match run(cmd, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("nsfde: {}", failure.message);
            ExitCode::from(failure.code as u8)
        }
    }
}
