//! Command-line front end: reproducible, config-driven runs of the norm
//! tables, bound curves, identity verification and output-norm maximization.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 resource ceiling.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use commands::{cmd_bounds, cmd_norms, cmd_optimize, cmd_verify, exit_code_for, Outcome};
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "gchan",
    about = "Gaussian bosonic channels in truncated Fock space: norms, bounds, moment-operator verification, input optimization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Compare closed-form output norms against quadrature evaluation.
    Norms,
    /// Emit the staircase upper / coherent-input lower bound curves over z.
    Bounds,
    /// Run the identity verification suite and emit a JSON report.
    Verify,
    /// Maximize the output trace power over pure inputs.
    Optimize,
}

fn main() {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(&cli.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e:#}");
            std::process::exit(2);
        }
    };
    let outcome = match cli.command {
        Command::Norms => cmd_norms(&cfg),
        Command::Bounds => cmd_bounds(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::Optimize => cmd_optimize(&cfg),
    };
    match outcome {
        Ok(Outcome::Pass) => {}
        Ok(Outcome::VerificationFailed) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit_code_for(&e));
        }
    }
}
