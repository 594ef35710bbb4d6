use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use luca::bench::{run, Command, RunConfig, DEFAULTS, ENCODER_URL_ENV};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Generate a synthetic dataset with train/val/test manifests.
    Generate,
    /// Train `runs` policies on the dataset's train split.
    Train,
    /// Evaluate heuristics, the oracle and checkpoints on a test set.
    Eval,
    /// Train and evaluate across `lambdas`.
    SweepLambda,
    /// Train and evaluate across emission-rate ratios in `ratios`.
    SweepRatio,
    /// Solve small instances exactly.
    Oracle,
    /// Summarise an eval or sweep output directory as markdown.
    Report,
    /// Print every setting with its default value.
    Settings,
}

/// Carbon-aware flexible job-shop scheduling experiments.
///
/// Settings are `key=value` pairs taken from defaults, then `--config`,
/// then `--set`, then the LUCA_ENCODER_URL environment variable.
#[derive(Debug, Parser)]
#[command(name = "luca", version)]
struct Cli {
    command: Cmd,
    /// File of `key=value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; written atomically.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one setting, e.g. `--set lambda=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let cmd = match cli.command {
        Cmd::Settings => {
            for (k, v) in DEFAULTS {
                println!("{k}={v}");
            }
            return Ok(());
        }
        Cmd::Generate => Command::Generate,
        Cmd::Train => Command::Train,
        Cmd::Eval => Command::Eval,
        Cmd::SweepLambda => Command::SweepLambda,
        Cmd::SweepRatio => Command::SweepRatio,
        Cmd::Oracle => Command::Oracle,
        Cmd::Report => Command::Report,
    };
    let mut overrides = RunConfig::parse_overrides(&cli.sets.join("\n"))?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &cli.out {
        overrides.push(("out".into(), out.display().to_string()));
    }
    let cfg = RunConfig::from_sources(cli.config.as_deref(), &overrides, std::env::var(ENCODER_URL_ENV).ok())?;
    let dir = run(cmd, &cfg)?;
    println!("{}", dir.display());
    Ok(())
}
