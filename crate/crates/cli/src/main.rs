//! `dqaoi`: closed forms, simulation, sweeps, convergence studies and exact
//! verification for zero-wait dual-queue status updating.
//!
//! Exit status: 0 success, 1 verification failure, 2 usage or parameter
//! error, 3 resource limit.

mod converge;
mod error;
mod eval;
mod output;
mod simulate;
mod sweep;
mod system;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;
use output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "dqaoi",
    version,
    about = "Age of information of zero-wait dual-queue status updating"
)]
struct Cli {
    /// Write the result to PATH instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format [default: human for eval and verify, json for
    /// simulate, csv for sweep and converge].
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Master seed of every simulation.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads [default: one per core]. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form averages of one system.
    Eval(eval::EvalArgs),
    /// Monte Carlo estimate with standard errors over rounds.
    Simulate(simulate::SimulateArgs),
    /// Tables over a parameter grid.
    #[command(subcommand)]
    Sweep(sweep::SweepCommand),
    /// Slotted systems scaled towards their continuous-time limits.
    Converge(converge::ConvergeArgs),
    /// Exact verification suites.
    #[command(subcommand)]
    Verify(verify::VerifyCommand),
}

/// Rendered output and whether a verification passed.
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

impl Outcome {
    pub fn pass(text: String) -> Self {
        Outcome { text, passed: true }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    match &cli.command {
        Command::Eval(a) => eval::run(a, cli.format),
        Command::Simulate(a) => simulate::run(a, cli.format, cli.seed),
        Command::Sweep(c) => sweep::run(c, cli.format, cli.seed),
        Command::Converge(a) => converge::run(a, cli.format),
        Command::Verify(c) => verify::run(c, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|o| output::emit(cli.out.as_deref(), &o.text).map(|_| o.passed)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(dqaoi_core::Error::ResourceLimit { .. }) = e {
                eprintln!("hint: lower --max-T or raise --cap");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
