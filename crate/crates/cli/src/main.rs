mod commands;
mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "abusecnn", version, about = "Tweet classification experiments: pretraining, CNN training, evaluation, augmentation")]
struct Cli {
    /// Flat key=value experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-filter the unlabelled corpus and train word vectors.
    Pretrain,
    /// Split the labelled data and train the CNN.
    Train,
    /// Evaluate the trained CNN and baselines, or score confusion counts.
    Eval {
        /// Directory holding the checkpoint, vocabulary and splits (default: output dir).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Labelled test set (default: the test split written by `train`).
        #[arg(long)]
        test: Option<PathBuf>,
        /// CSV of `name,tp,tn,fp,fn` rows to score instead of running models.
        #[arg(long, conflicts_with_all = ["model", "test"])]
        counts: Option<PathBuf>,
    },
    /// Write the augmented datasets of every configured policy.
    Augment,
    /// Stratified k-fold cross-validation of the CNN.
    Crossval,
    /// Score JSON Lines tweets from stdin; writes `id,probability,label` CSV.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path, cli.seed, cli.out.as_deref())?,
        None => ExperimentConfig::from_kv(BTreeMap::new(), Path::new("."), cli.seed, cli.out.as_deref())?,
    };
    match cli.command {
        Command::Pretrain => commands::cmd_pretrain(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Eval { model, test, counts } => {
            let model = model.unwrap_or_else(|| cfg.out_dir.clone());
            commands::cmd_eval(&cfg, &model, test.as_deref(), counts.as_deref())
        }
        Command::Augment => commands::cmd_augment(&cfg),
        Command::Crossval => commands::cmd_crossval(&cfg),
        Command::Predict { model } => {
            let model = model.unwrap_or_else(|| cfg.out_dir.clone());
            commands::cmd_predict(&model, std::io::stdin().lock(), std::io::stdout().lock())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
