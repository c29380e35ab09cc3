mod commands;
mod config;
mod run;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

/// Semantic change detection over diachronic word embeddings.
#[derive(Parser)]
#[command(name = "semshift", version)]
struct Cli {
    /// TOML file with experiment settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: ExperimentConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset manifest, report its shape and write a normalized copy.
    Ingest,
    /// Partition the vocabulary into train, validation and test words.
    Split,
    /// Blend test words towards target words to create gold changes.
    Inject,
    /// Train a sequence model, or search its hyperparameters.
    Train,
    /// Rank test words with a trained checkpoint.
    Score,
    /// Rank and evaluate methods at one value of i each.
    Evaluate,
    /// Evaluate methods across values of i with mean and std.
    Sweep,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let settings = match &cli.config {
        Some(path) => ExperimentConfig::read(path)?.overlay(&cli.settings),
        None => cli.settings.clone(),
    };
    match cli.command {
        Command::Ingest => commands::cmd_ingest(&settings),
        Command::Split => commands::cmd_split(&settings),
        Command::Inject => commands::cmd_inject(&settings),
        Command::Train => commands::cmd_train(&settings),
        Command::Score => commands::cmd_score(&settings),
        Command::Evaluate => commands::cmd_evaluate(&settings, false),
        Command::Sweep => commands::cmd_evaluate(&settings, true),
    }
}
