//! `nmp-sim`: run, compare and summarize networked-music-performance scenarios.
//!
//! Exit status: 0 on success, 1 when the scenario (or trace) cannot be read or
//! fails validation, 2 on a runtime error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "nmp-sim",
    version,
    about = "SDN-assisted networked music performance simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Where to write the CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BaselineArg::None)]
        baseline: BaselineArg,
    },
    /// Run the adaptive loop and a baseline, and report the improvement.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = BaselineArg::NoAdapt)]
        baseline: BaselineArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Summarize an existing CSV trace.
    Summarize {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = nmp_core::DEFAULT_EPT_MS)]
        ept_ms: f64,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(clap::Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Overrides the scenario's probe interval.
    #[arg(long)]
    probe_interval_ms: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    None,
    NoAdapt,
    Pinned,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Run {
            scenario,
            trace,
            baseline,
        } => commands::run(&scenario, trace.as_deref(), baseline),
        Command::Compare {
            scenario,
            baseline,
            format,
        } => commands::compare(&scenario, baseline, format),
        Command::Summarize { trace, ept_ms } => commands::summarize(&trace, ept_ms),
        Command::Validate { scenario } => commands::validate(&scenario),
    };
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
