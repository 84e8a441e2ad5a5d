use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ladderloc::experiment::{run, ExperimentConfig, RunManifest, RunOptions, Stage, StageStatus};
use ladderloc::Error;

#[derive(Parser)]
#[command(name = "ladderloc", version, about = "Localization experiments for lattice operators in a uniform field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize every configured box and write spectrum dumps.
    Spectrum(Common),
    /// Spectrum plus eigenvalue pinning, decay constants and the decay inequality.
    Localize(Common),
    /// Spectrum plus wave-packet moments and envelopes.
    Evolve(Common),
    /// Every enabled stage, including the box-doubling study.
    Study(Common),
    /// Recompute all summaries from the spectrum dumps already in `--out`.
    Report(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for the parallel stages.
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_STAGE: u8 = 2;

fn stages(command: &Command) -> Vec<Stage> {
    match command {
        Command::Spectrum(_) => vec![Stage::Spectrum],
        Command::Localize(_) => vec![Stage::Spectrum, Stage::Asymptotics, Stage::Ule, Stage::Bootstrap],
        Command::Evolve(_) => vec![Stage::Spectrum, Stage::Dynamics],
        Command::Study(_) | Command::Report(_) => Stage::ALL.to_vec(),
    }
}

#[cfg(feature = "parallel")]
fn set_threads(threads: usize) -> anyhow::Result<()> {
    use anyhow::Context;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_threads: usize) -> anyhow::Result<()> {
    Ok(())
}

fn print_summary(m: &RunManifest) {
    for s in &m.stages {
        let state = match &s.status {
            StageStatus::Completed => "completed".to_string(),
            StageStatus::Resumed => "resumed".to_string(),
            StageStatus::Failed { cause } => format!("FAILED: {cause}"),
            StageStatus::Skipped { reason } => format!("skipped: {reason}"),
            StageStatus::Disabled => continue,
        };
        println!("{:<12} {:>8.2}s  {state}", s.stage.name(), s.seconds);
    }
    for c in m.theorem_checks.iter().filter(|c| !c.pass) {
        println!("check {} (N={}) failed: {}", c.name, c.half_width, c.detail);
    }
    let passed = m.theorem_checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} checks passed, config {}", m.theorem_checks.len(), &m.config_hash[..12]);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (Command::Spectrum(common)
    | Command::Localize(common)
    | Command::Evolve(common)
    | Command::Study(common)
    | Command::Report(common)) = &cli.command;

    if let Some(k) = common.threads {
        if let Err(e) = set_threads(k) {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_STAGE);
        }
    }

    let mut cfg = match ExperimentConfig::load(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("ladderloc-out"));
    let opts = RunOptions {
        out,
        stages: stages(&cli.command).into_iter().collect(),
        require_dumps: matches!(cli.command, Command::Report(_)),
    };

    match run(&cfg, &opts) {
        Ok(manifest) => {
            print_summary(&manifest);
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e @ Error::ConfigInvalid { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}
