use std::fmt::Write as _;

use abusecnn::corpus::kfold;
use abusecnn::eval::{evaluate, to_csv};
use abusecnn::numerics::Rng;
use anyhow::Result;
use log::info;

use super::{ensure_dir, input_vectors, load_dataset, train_cnn};
use crate::config::ExperimentConfig;
use crate::manifest::Manifest;

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains one CNN per stratified fold and summarises fold accuracy.
pub fn cmd_crossval(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.require(&cfg.labelled, "data.labelled")?;
    let data = load_dataset(path)?;
    let folds = kfold(&data, cfg.folds, Rng::derive_seed(cfg.seed, "folds"))?;
    let mut reports = Vec::new();
    for (i, (train, valid)) in folds.iter().enumerate() {
        let trained = train_cnn(cfg, train, &format!("fold{}", i + 1))?;
        let encoded = valid.encode(&trained.vocab, trained.model.config().max_len)?;
        let tweets: Vec<_> = encoded.into_iter().map(|(t, _)| t).collect();
        let report = evaluate(&trained.model.predict_labels(&tweets)?, &valid.labels())?;
        info!("fold {}: accuracy {:.4}", i + 1, report.accuracy);
        reports.push((format!("fold{}", i + 1), report));
    }
    let accs: Vec<f64> = reports.iter().map(|(_, r)| r.accuracy).collect();
    let (mean, std) = mean_std(&accs);
    let mut summary = String::from("fold,accuracy\n");
    for (name, r) in &reports {
        let _ = writeln!(summary, "{name},{}", r.accuracy);
    }
    let _ = writeln!(summary, "mean,{mean}");
    let _ = writeln!(summary, "std,{std}");

    ensure_dir(&cfg.out_dir)?;
    let mut m = Manifest::new("crossval", cfg);
    m.input("labelled", path)?;
    if let Some(v) = input_vectors(cfg) {
        m.input("vectors", &v)?;
    }
    m.set("folds", cfg.folds);
    m.write_artifact(&cfg.out_dir, "folds.csv", to_csv(&reports).as_bytes())?;
    m.write_artifact(&cfg.out_dir, "crossval_summary.csv", summary.as_bytes())?;
    m.save(&cfg.out_dir.join("crossval.manifest"))
}

#[cfg(test)]
mod tests {
    use super::mean_std;

    #[test]
    fn sample_standard_deviation() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }
}
