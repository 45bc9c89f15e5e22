use clap::{Parser, Subcommand};
use phstab::cli::{self, CommonOpts};
use std::path::PathBuf;

/// Simulation and stability certification for linear port-Hamiltonian PDE
/// systems on an interval.
#[derive(Parser)]
#[command(name = "phstab", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON config file.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Output directory for reports and series files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Reject unknown config keys instead of warning.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the generator hypotheses and the contractivity conditions.
    Validate,
    /// Run the method-of-lines simulation and export the trajectory.
    Simulate,
    /// Compute the exponential decay certificate (optionally cross-checked
    /// against a simulation).
    Certify,
    /// Evolve the two-line transport network exactly and classify growth.
    Counterexample {
        /// Coupling gain.
        #[arg(long)]
        alpha: Option<f64>,
        /// Number of periods to evolve.
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Validation, simulation, certification and all inequality checks in
    /// one JSON document.
    Report,
}

fn main() {
    let args = Args::parse();
    let opts = CommonOpts {
        config_path: args.config,
        out_dir: args.out,
        strict: args.strict,
    };
    let code = match args.command {
        Command::Validate => cli::cmd_validate(&opts),
        Command::Simulate => cli::cmd_simulate(&opts),
        Command::Certify => cli::cmd_certify(&opts),
        Command::Counterexample { alpha, periods } => {
            cli::cmd_counterexample(&opts, alpha, periods)
        }
        Command::Report => cli::cmd_report(&opts),
    };
    std::process::exit(code);
}
