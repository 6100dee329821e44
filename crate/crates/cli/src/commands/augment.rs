use std::fs;

use abusecnn::augment::run_at_suite;
use abusecnn::augment::PolicyKind;
use abusecnn::corpus::to_jsonl;
use abusecnn::embedding::load_vectors;
use anyhow::{anyhow, Context, Result};
use log::info;

use super::{ensure_dir, load_dataset};
use crate::config::ExperimentConfig;
use crate::manifest::{digest_bytes, Manifest};

/// Runs the configured augmentation policies over the labelled data.
/// AT0 is written as a byte copy of the input file.
pub fn cmd_augment(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.require(&cfg.labelled, "data.labelled")?;
    let vectors = cfg
        .vectors_path()
        .ok_or_else(|| anyhow!("augmentation needs word vectors; embedding.mode=random has none"))?;
    let emb = load_vectors(&vectors).with_context(|| format!("loading {}", vectors.display()))?;
    let data = load_dataset(path)?;
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let suite = run_at_suite(&data, &emb, &cfg.augment)?;

    let dir = cfg.out_dir.join("augment");
    ensure_dir(&dir)?;
    let mut m = Manifest::new("augment", cfg);
    m.input("labelled", path)?;
    m.input("vectors", &vectors)?;
    for entry in &suite {
        let name = entry.policy.kind.name();
        let bytes = if entry.policy.kind == PolicyKind::At0 {
            raw.clone()
        } else {
            to_jsonl(&entry.dataset.to_tweet_records()).into_bytes()
        };
        info!("{name}: {} -> {} records", entry.input_size, entry.output_size());
        m.write_artifact(&dir, &format!("{name}.jsonl"), &bytes)?;
        let policy_manifest = format!("{}digest={}\n", entry.manifest(), digest_bytes(&bytes));
        m.write_artifact(&dir, &format!("{name}.manifest"), policy_manifest.as_bytes())?;
        m.set(&format!("size.{name}"), entry.output_size());
    }
    m.save(&cfg.out_dir.join("augment.manifest"))
}
