use abusecnn::cnn::write_checkpoint;
use abusecnn::corpus::{stratified_split, to_jsonl};
use abusecnn::numerics::Rng;
use anyhow::Result;

use super::{ensure_dir, input_vectors, load_dataset, train_cnn, CHECKPOINT, TEST_SPLIT, TRAIN_SPLIT, VOCAB};
use crate::config::ExperimentConfig;
use crate::manifest::Manifest;

/// Splits the labelled data, trains the CNN on the training share and
/// writes the checkpoint, vocabulary, history and both splits.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.require(&cfg.labelled, "data.labelled")?;
    let data = load_dataset(path)?;
    let (train, test) = stratified_split(&data, cfg.test_fraction, Rng::derive_seed(cfg.seed, "split"))?;
    let trained = train_cnn(cfg, &train, "train")?;

    ensure_dir(&cfg.out_dir)?;
    let dir = &cfg.out_dir;
    let mut m = Manifest::new("train", cfg);
    m.input("labelled", path)?;
    if let Some(v) = input_vectors(cfg) {
        m.input("vectors", &v)?;
    }
    let [tn, tp] = train.class_counts();
    let [sn, sp] = test.class_counts();
    m.set("split.train_negative", tn);
    m.set("split.train_positive", tp);
    m.set("split.test_negative", sn);
    m.set("split.test_positive", sp);
    m.set("split.fit", trained.fit_size);
    m.set("split.validation", trained.validation_size);
    m.set("epochs_run", trained.history.len());
    m.set("best_epoch", trained.history.best_epoch.map(|e| (e + 1).to_string()).unwrap_or_default());
    m.set("vocab_hash", trained.vocab.hash_hex());
    m.write_artifact(dir, TRAIN_SPLIT, to_jsonl(&train.to_tweet_records()).as_bytes())?;
    m.write_artifact(dir, TEST_SPLIT, to_jsonl(&test.to_tweet_records()).as_bytes())?;
    m.write_artifact(dir, VOCAB, trained.vocab.to_tsv().as_bytes())?;
    m.write_artifact(dir, "history.csv", trained.history.to_csv().as_bytes())?;
    let mut ckpt = Vec::new();
    write_checkpoint(&trained.model, &mut ckpt)?;
    m.write_artifact(dir, CHECKPOINT, &ckpt)?;
    m.save(&dir.join("train.manifest"))
}
