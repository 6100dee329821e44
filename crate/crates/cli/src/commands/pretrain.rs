use std::sync::Arc;

use abusecnn::corpus::{prefilter, read_jsonl, KeywordSet, Vocabulary};
use abusecnn::embedding::{format_vectors, train_word2vec, Provenance};
use anyhow::{bail, Context, Result};
use log::info;

use super::ensure_dir;
use crate::config::ExperimentConfig;
use crate::manifest::Manifest;

/// Pre-filters the unlabelled corpus and trains word vectors on it.
pub fn cmd_pretrain(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.require(&cfg.unlabelled, "data.unlabelled")?;
    let records = read_jsonl(path).with_context(|| format!("reading corpus {}", path.display()))?;
    let keywords = match &cfg.keywords {
        Some(k) => KeywordSet::from_file(k)?,
        None => KeywordSet::default(),
    };
    let corpus: Vec<Vec<String>> = records
        .iter()
        .filter(|r| prefilter(r, &keywords))
        .map(|r| r.tokens())
        .collect();
    info!("pre-filter kept {} of {} tweets", corpus.len(), records.len());
    if corpus.is_empty() {
        bail!("empty pre-filtered corpus: no tweet in {} contains a keyword", path.display());
    }
    let vocab = Arc::new(Vocabulary::build(&corpus, cfg.pretrain.min_count)?);
    let (emb, stats) = train_word2vec(&corpus, vocab.clone(), &cfg.pretrain.word2vec, cfg.pretrain.objective)?;
    let emb = emb.with_provenance(Provenance::DomainPretrained);
    info!("trained {} vectors; epoch losses {:?}", vocab.len(), stats.epoch_losses);

    ensure_dir(&cfg.out_dir)?;
    let mut m = Manifest::new("pretrain", cfg);
    m.input("unlabelled", path)?;
    if let Some(k) = &cfg.keywords {
        m.input("keywords", k)?;
    }
    m.set("records_in", records.len());
    m.set("records_kept", corpus.len());
    m.set("vocab_size", vocab.len());
    m.write_artifact(&cfg.out_dir, "vectors.txt", format_vectors(&emb).as_bytes())?;
    m.save(&cfg.out_dir.join("pretrain.manifest"))
}
