use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lmcert_core::SolveMethod;

#[derive(Debug, Parser)]
#[command(
    name = "lmcert",
    version,
    about = "Certify local minimax points of constrained minimax problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a problem file and check candidate dimensions.
    Validate(Run),
    /// Run the full certification pipeline.
    Certify(Run),
    /// Value function, gradient and Hessian against finite differences.
    ValueDerivs(Run),
    /// Solve the lower-level problem and print the Newton trace.
    SolveLower(Run),
    /// Grid check of the local minimax definition.
    Oracle(Run),
    /// Enumerate selectors and candidate gradients of the value function.
    Subdiff(Run),
}

impl Command {
    pub fn run_args(&self) -> &Run {
        match self {
            Command::Validate(r)
            | Command::Certify(r)
            | Command::ValueDerivs(r)
            | Command::SolveLower(r)
            | Command::Oracle(r)
            | Command::Subdiff(r) => r,
        }
    }
}

#[derive(Debug, Args)]
pub struct Run {
    /// Problem file.
    pub problem: PathBuf,
    /// Upper variables, comma separated. Repeat for several candidates.
    #[arg(long = "x", allow_hyphen_values = true)]
    pub x: Vec<String>,
    /// Lower variables (the Newton seed where no candidate is needed).
    #[arg(long = "y", allow_hyphen_values = true)]
    pub y: Vec<String>,
    /// Lower equality multipliers.
    #[arg(long = "mu", allow_hyphen_values = true)]
    pub mu: Vec<String>,
    /// Lower inequality multipliers.
    #[arg(long = "lambda", allow_hyphen_values = true)]
    pub lambda: Vec<String>,
    /// Upper equality multipliers.
    #[arg(long = "u", allow_hyphen_values = true)]
    pub u: Vec<String>,
    /// Upper inequality multipliers.
    #[arg(long = "v", allow_hyphen_values = true)]
    pub v: Vec<String>,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the JSON output to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Candidates processed in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
    /// Seed for sampled checks, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lower-level Newton variant.
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Auto,
    Smooth,
    Nonsmooth,
}

impl From<MethodArg> for SolveMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => SolveMethod::Auto,
            MethodArg::Smooth => SolveMethod::Smooth,
            MethodArg::Nonsmooth => SolveMethod::Nonsmooth,
        }
    }
}
