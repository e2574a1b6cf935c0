use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use medley_cli::config::ExperimentConfig;
use medley_cli::pipeline::{describe, root_message, Session};
use medley_cli::report::write_manifest;

#[derive(Parser)]
#[command(
    name = "medley",
    version,
    about = "Hybrid ensemble experiments on the Cleveland heart-disease data"
)]
struct Cli {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root random seed, overriding the config file's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory receiving all artifacts; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, split, and standardize the dataset.
    Ingest,
    /// Train the four base learners and record their errors.
    Train,
    /// Estimate the validation risk matrix and optimize ensemble weights.
    Ensemble,
    /// Train the stacked meta-model on out-of-fold predictions.
    Stack,
    /// Mutual-information feature-integration analysis.
    Mi,
    /// Hyperparameter search over the tree and margin learners.
    Tune,
    /// Benchmark the adaptive restart policy against random restarts.
    RestartBench,
    /// Generalization-error comparison across seeded re-splits.
    Report,
    /// Run every stage in order and write the MANIFEST.
    RunAll,
    /// Print the resolved execution plan without running anything.
    Describe,
}

impl Command {
    fn stage_name(&self) -> Option<&'static str> {
        match self {
            Command::Ingest => Some("ingest"),
            Command::Train => Some("train"),
            Command::Ensemble => Some("ensemble"),
            Command::Stack => Some("stack"),
            Command::Mi => Some("mi"),
            Command::Tune => Some("tune"),
            Command::RestartBench => Some("restart-bench"),
            Command::Report => Some("report"),
            Command::RunAll | Command::Describe => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let seed = cfg.seed();

    if let Command::Describe = cli.command {
        let text = describe(&cfg, seed, &cli.out)?;
        print!("{text}");
        return Ok(());
    }

    cfg.validate()?;
    let mut session = Session::new(cfg, seed, cli.out.clone());
    match cli.command.stage_name() {
        None => session.run_all(),
        Some(stage) => match session.run_stage(stage) {
            Ok(()) => {
                write_manifest(&cli.out, None)?;
                Ok(())
            }
            Err(err) => {
                let note = format!("{stage}: {}", root_message(&err));
                let _ = write_manifest(&cli.out, Some(&note));
                Err(err)
            }
        },
    }
}
