use std::path::Path;

use abusecnn::baselines::{ridge_fit, train_dnn, train_mnb, BowFeaturizer, BowScheme, KnnModel};
use abusecnn::corpus::LabeledDataset;
use abusecnn::eval::{evaluate, metrics, report_table, to_csv, ConfusionMatrix, MetricsReport};
use anyhow::{anyhow, bail, Context, Result};
use log::info;

use super::predict::load_model;
use super::{ensure_dir, load_dataset, TEST_SPLIT, TRAIN_SPLIT, VOCAB, CHECKPOINT};
use crate::config::{Baseline, ExperimentConfig};
use crate::manifest::Manifest;

/// Parses `name,tp,tn,fp,fn` rows under a header line.
pub fn parse_counts(text: &str) -> Result<Vec<(String, ConfusionMatrix)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| anyhow!("counts file is empty"))?;
    if header.trim() != "name,tp,tn,fp,fn" {
        bail!("counts header must be `name,tp,tn,fp,fn`, got `{header}`");
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                bail!("bad counts row `{line}`");
            }
            let n = |i: usize| f[i].parse::<u64>().with_context(|| format!("bad count in `{line}`"));
            Ok((f[0].to_string(), ConfusionMatrix::new(n(1)?, n(2)?, n(3)?, n(4)?)))
        })
        .collect()
}

fn baseline_predictions(
    kind: Baseline,
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    vocab: &std::sync::Arc<abusecnn::corpus::Vocabulary>,
) -> Result<Vec<u8>> {
    let b = &cfg.baselines;
    let scheme: BowScheme = if kind == Baseline::Mnb { b.mnb_scheme } else { b.scheme };
    let feat = BowFeaturizer::fit(vocab.clone(), train.token_seqs(), scheme);
    let xs = feat.featurize_all(train.token_seqs());
    let qs = feat.featurize_all(test.token_seqs());
    let labels = train.labels();
    Ok(match kind {
        Baseline::Mnb => train_mnb(&xs, &labels, feat.dim(), b.mnb_alpha)?.predict_all(&qs)?,
        Baseline::Knn => KnnModel::fit(xs, labels, b.knn_k)?.predict_all(&qs),
        Baseline::Ridge => ridge_fit(&xs, &labels, feat.dim(), b.ridge_lambda)?.predict_all(&qs)?,
        Baseline::Dnn => train_dnn(&xs, &labels, feat.dim(), &b.dnn)?.predict_all(&qs)?,
    })
}

fn write_reports(cfg: &ExperimentConfig, m: &mut Manifest, reports: &[(String, MetricsReport)]) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    m.write_artifact(&cfg.out_dir, "metrics.csv", to_csv(reports).as_bytes())?;
    let table = report_table(reports);
    m.write_artifact(&cfg.out_dir, "table.txt", table.as_bytes())?;
    info!("\n{table}");
    m.save(&cfg.out_dir.join("eval.manifest"))
}

/// Metrics for named confusion counts, without any model.
pub fn eval_counts(cfg: &ExperimentConfig, counts_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(counts_path).with_context(|| format!("reading {}", counts_path.display()))?;
    let reports = parse_counts(&text)?
        .into_iter()
        .map(|(name, cm)| Ok((name, metrics(cm)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut m = Manifest::new("eval", cfg);
    m.input("counts", counts_path)?;
    write_reports(cfg, &mut m, &reports)
}

/// Evaluates the checkpointed CNN and the selected baselines on the test set.
/// Baselines are fitted on the training split over the checkpoint vocabulary.
pub fn cmd_eval(cfg: &ExperimentConfig, model_dir: &Path, test_path: Option<&Path>, counts: Option<&Path>) -> Result<()> {
    if let Some(c) = counts {
        return eval_counts(cfg, c);
    }
    let model = load_model(model_dir)?;
    let vocab = model.embedding().vocab().clone();
    let default_test = model_dir.join(TEST_SPLIT);
    let test_path = test_path.unwrap_or(&default_test);
    let test = load_dataset(test_path)?;
    if test.is_empty() {
        bail!("test set {} is empty", test_path.display());
    }
    let encoded = test.encode(&vocab, model.config().max_len)?;
    let tweets: Vec<_> = encoded.iter().map(|(t, _)| t.clone()).collect();
    let labels = test.labels();
    let mut reports = vec![("CNN".to_string(), evaluate(&model.predict_labels(&tweets)?, &labels)?)];

    let mut m = Manifest::new("eval", cfg);
    m.input("checkpoint", &model_dir.join(CHECKPOINT))?;
    m.input("vocab", &model_dir.join(VOCAB))?;
    m.input("test", test_path)?;
    m.set("vocab_hash", vocab.hash_hex());
    m.set("test_size", test.len());
    if !cfg.baselines.models.is_empty() {
        let train_path = model_dir.join(TRAIN_SPLIT);
        let train = load_dataset(&train_path)?;
        m.input("train", &train_path)?;
        for &kind in &cfg.baselines.models {
            let preds = baseline_predictions(kind, cfg, &train, &test, &vocab)
                .with_context(|| format!("baseline {}", kind.name()))?;
            reports.push((kind.name().to_string(), evaluate(&preds, &labels)?));
        }
    }
    write_reports(cfg, &mut m, &reports)
}
