use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use abusecnn::cnn::{self, CnnModel, TrainHistory};
use abusecnn::corpus::{read_jsonl, stratified_split, LabeledDataset, Vocabulary};
use abusecnn::embedding::{load_vectors, EmbeddingMatrix, Provenance};
use abusecnn::numerics::Rng;
use anyhow::{bail, Context, Result};
use log::{info, warn};

use crate::config::{EmbeddingMode, ExperimentConfig};

mod augment;
mod crossval;
mod eval;
mod predict;
mod pretrain;
mod train;

pub use augment::cmd_augment;
pub use crossval::cmd_crossval;
pub use eval::cmd_eval;
pub use predict::cmd_predict;
pub use pretrain::cmd_pretrain;
pub use train::cmd_train;

pub const CHECKPOINT: &str = "model.ckpt";
pub const VOCAB: &str = "vocab.tsv";
pub const TRAIN_SPLIT: &str = "train.jsonl";
pub const TEST_SPLIT: &str = "test.jsonl";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Labelled records with empty token lists removed.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let records = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    let mut data = LabeledDataset::from_records(&records)
        .with_context(|| format!("loading labelled data from {}", path.display()))?;
    let dropped = data.drop_empty();
    if dropped > 0 {
        warn!("{}: dropped {dropped} records with no tokens", path.display());
    }
    Ok(data)
}

/// Embedding over `vocab` for the configured mode.
pub fn build_embedding(cfg: &ExperimentConfig, vocab: Arc<Vocabulary>, rng: &mut Rng) -> Result<EmbeddingMatrix> {
    let e = &cfg.embedding;
    let emb = match cfg.vectors_path() {
        None => EmbeddingMatrix::random_init(vocab, e.dim, rng)?,
        Some(path) => {
            if !path.exists() {
                bail!("vector file {} does not exist (run `pretrain` first?)", path.display());
            }
            let source = load_vectors(&path).with_context(|| format!("loading {}", path.display()))?;
            let provenance = match e.mode {
                EmbeddingMode::Domain => Provenance::DomainPretrained,
                _ => Provenance::GeneralPretrained,
            };
            source.project(vocab, rng)?.with_provenance(provenance)
        }
    };
    Ok(emb.with_trainable(e.trainable))
}

pub fn input_vectors(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.vectors_path().filter(|p| p.exists())
}

pub struct TrainedCnn {
    pub model: CnnModel,
    pub history: TrainHistory,
    pub vocab: Arc<Vocabulary>,
    pub fit_size: usize,
    pub validation_size: usize,
}

/// Builds a vocabulary from `data` alone, carves a stratified validation
/// share for early stopping and trains the CNN. `stream` names the seed stage.
pub fn train_cnn(cfg: &ExperimentConfig, data: &LabeledDataset, stream: &str) -> Result<TrainedCnn> {
    let vocab = Arc::new(Vocabulary::build(data.token_seqs(), cfg.vocab_min_count)?);
    let mut rng = Rng::derive(cfg.seed, &format!("{stream}/init"));
    let emb = build_embedding(cfg, vocab.clone(), &mut rng)?;
    let counts = data.class_counts();
    let (fit, valid) = if cfg.validation_fraction > 0.0 && counts.iter().all(|&c| c >= 4) {
        stratified_split(data, cfg.validation_fraction, Rng::derive_seed(cfg.seed, &format!("{stream}/validation")))?
    } else {
        if cfg.validation_fraction > 0.0 {
            warn!("too few records per class for a validation split; early stopping disabled");
        }
        (data.clone(), LabeledDataset::default())
    };
    let mut cnn_cfg = cfg.cnn.clone();
    cnn_cfg.seed = Rng::derive_seed(cfg.cnn.seed, stream);
    let max_len = cnn_cfg.max_len;
    let model = CnnModel::new(cnn_cfg, emb, &mut rng)?;
    let (model, history) = cnn::train(model, &fit.encode(&vocab, max_len)?, &valid.encode(&vocab, max_len)?)?;
    info!(
        "trained on {} records ({} validation) for {} epochs",
        fit.len(),
        valid.len(),
        history.len()
    );
    Ok(TrainedCnn {
        model,
        history,
        vocab,
        fit_size: fit.len(),
        validation_size: valid.len(),
    })
}
