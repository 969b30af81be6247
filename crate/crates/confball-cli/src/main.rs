//! `confball`: run the Monte-Carlo experiments from JSON configs.
//!
//! Exit codes: 0 when every gate passes, 1 when a gate fails, 2 on config or
//! usage errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use confball::harness::{run, ExperimentConfig, ExperimentKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "confball",
    version,
    about = "Monte-Carlo experiments for adaptive confidence balls in the Gaussian sequence model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate coverage of a ball at a fixed mean vector.
    Coverage(RunArgs),
    /// Scan mean squared radius over a list of n and fit a log-log slope.
    RadiusScan(RunArgs),
    /// Compare a closed-form lower-bound floor with the ball's Monte-Carlo
    /// mean squared radius at theta = 0.
    LowerBound(RunArgs),
    /// Run the lemma verification suite.
    Lemmas(RunArgs),
}

impl Command {
    fn expected_kind(&self) -> ExperimentKind {
        match self {
            Command::Coverage(_) => ExperimentKind::Coverage,
            Command::RadiusScan(_) => ExperimentKind::RadiusScan,
            Command::LowerBound(_) => ExperimentKind::LowerBoundCheck,
            Command::Lemmas(_) => ExperimentKind::LemmaSuite,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Coverage(a)
            | Command::RadiusScan(a)
            | Command::LowerBound(a)
            | Command::Lemmas(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Json,
    Csv,
}

fn run_command(command: &Command) -> Result<bool, String> {
    let args = command.args();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
    let expected = command.expected_kind();
    if config.kind != expected {
        return Err(format!(
            "config kind {:?} does not match this subcommand (expected {:?})",
            config.kind, expected
        ));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| e.to_string())?;

    let report = run(&config).map_err(|e| e.to_string())?;
    let rendered = match args.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &args.out {
        Some(path) => std::fs::write(path, &rendered)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
