//! Confusion counts, the six reported metrics, and comparison tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("label or prediction must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("both classes must be present")]
    SingleClass,
    #[error("csv: {0}")]
    Csv(String),
    #[error("row `{name}`: {field} does not match the counts")]
    Inconsistent { name: String, field: &'static str },
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same outcomes with class 0 taken as positive.
    pub fn swapped(&self) -> Self {
        Self::new(self.tn, self.tp, self.fn_, self.fp)
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            _ => return Err(EvalError::BadLabel(p.max(y))),
        }
    }
    Ok(cm)
}

/// Metrics whose denominator was zero; each such value is reported as 0,
/// except kappa, which is 1 when both raters agree on a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub kappa: bool,
    pub auc: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.kappa || self.auc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub counts: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kappa: f64,
    /// Balanced accuracy of the hard predictions, `(TPR + TNR) / 2`.
    pub auc: f64,
    pub degenerate: Degenerate,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: ConfusionMatrix) -> Result<MetricsReport> {
    let n = cm.total();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let mut d = Degenerate::default();
    let accuracy = (cm.tp + cm.tn) as f64 / n as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp, &mut d.precision);
    let recall = ratio(cm.tp, cm.tp + cm.fn_, &mut d.recall);
    let f1 = if precision + recall == 0.0 {
        d.f1 = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let nf = n as f64;
    let p_e = ((cm.tp + cm.fp) as f64 * (cm.tp + cm.fn_) as f64 + (cm.tn + cm.fn_) as f64 * (cm.tn + cm.fp) as f64)
        / (nf * nf);
    let kappa = if p_e == 1.0 {
        d.kappa = true;
        1.0
    } else {
        (accuracy - p_e) / (1.0 - p_e)
    };
    let mut tpr_flag = false;
    let mut tnr_flag = false;
    let tpr = ratio(cm.tp, cm.tp + cm.fn_, &mut tpr_flag);
    let tnr = ratio(cm.tn, cm.tn + cm.fp, &mut tnr_flag);
    d.auc = tpr_flag || tnr_flag;
    Ok(MetricsReport {
        counts: cm,
        accuracy,
        precision,
        recall,
        f1,
        kappa,
        auc: (tpr + tnr) / 2.0,
        degenerate: d,
    })
}

pub fn evaluate(predictions: &[u8], labels: &[u8]) -> Result<MetricsReport> {
    metrics(confusion(predictions, labels)?)
}

/// Threshold-sweep ROC AUC (Mann-Whitney statistic, ties count one half).
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(EvalError::BadLabel(y));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut rank_sum, mut i) = (0.0, 0);
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64 * mid;
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(EvalError::SingleClass);
    }
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

pub const CSV_HEADER: [&str; 11] = [
    "name", "tp", "tn", "fp", "fn", "accuracy", "precision", "recall", "f1", "kappa", "auc",
];

fn metric_values(r: &MetricsReport) -> [(&'static str, f64); 6] {
    [
        ("accuracy", r.accuracy),
        ("precision", r.precision),
        ("recall", r.recall),
        ("f1", r.f1),
        ("kappa", r.kappa),
        ("auc", r.auc),
    ]
}

/// Machine-readable table, one row per report, values at full precision.
pub fn to_csv(reports: &[(String, MetricsReport)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for (name, r) in reports {
        let c = r.counts;
        let mut row = vec![name.clone(), c.tp.to_string(), c.tn.to_string(), c.fp.to_string(), c.fn_.to_string()];
        row.extend(metric_values(r).iter().map(|(_, v)| v.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Parses [`to_csv`] output, rejecting rows whose metrics disagree with
/// their counts.
pub fn from_csv(text: &str) -> Result<Vec<(String, MetricsReport)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| EvalError::Csv(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(EvalError::Csv(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| EvalError::Csv(e.to_string()))?;
        let name = row[0].to_string();
        let count = |i: usize| row[i].parse::<u64>().map_err(|e| EvalError::Csv(format!("{name}: {e}")));
        let report = metrics(ConfusionMatrix::new(count(1)?, count(2)?, count(3)?, count(4)?))?;
        for (i, (field, v)) in metric_values(&report).iter().enumerate() {
            let parsed: f64 = row[5 + i].parse().map_err(|e| EvalError::Csv(format!("{name}: {e}")))?;
            if parsed.to_bits() != v.to_bits() {
                return Err(EvalError::Inconsistent { name, field });
            }
        }
        out.push((name, report));
    }
    Ok(out)
}

/// Human-readable comparison: one column per report, best value per row
/// marked with `*` (highest, or lowest for FP and FN).
pub fn report_table(reports: &[(String, MetricsReport)]) -> String {
    let mut rows: Vec<(&str, Vec<f64>, bool, bool)> = vec![
        ("TP", reports.iter().map(|r| r.1.counts.tp as f64).collect(), true, true),
        ("TN", reports.iter().map(|r| r.1.counts.tn as f64).collect(), true, true),
        ("FP", reports.iter().map(|r| r.1.counts.fp as f64).collect(), false, true),
        ("FN", reports.iter().map(|r| r.1.counts.fn_ as f64).collect(), false, true),
    ];
    let labels = ["Accuracy", "Precision", "Recall", "F1", "Kappa", "AUC"];
    for (i, label) in labels.into_iter().enumerate() {
        rows.push((label, reports.iter().map(|r| metric_values(&r.1)[i].1).collect(), true, false));
    }
    let width = reports.iter().map(|r| r.0.len()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<10}", "");
    for (name, _) in reports {
        let _ = write!(out, " {name:>width$} ");
    }
    out = out.trim_end().to_string();
    out.push('\n');
    for (label, values, higher, integer) in rows {
        let best = if higher {
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        } else {
            values.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let _ = write!(out, "{label:<10}");
        for &v in &values {
            let cell = if integer { format!("{v:.0}") } else { format!("{v:.3}") };
            let mark = if reports.len() > 1 && v == best { '*' } else { ' ' };
            let _ = write!(out, " {cell:>width$}{mark}");
        }
        out = out.trim_end().to_string();
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_cases() {
        assert_eq!(confusion(&[1, 0], &[1, 0]).unwrap(), ConfusionMatrix::new(1, 1, 0, 0));
        let labels = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0];
        let cm = confusion(&[1; 10], &labels).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.total()), (5, 5, 10));
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[2], &[1]).is_err());
    }

    #[test]
    fn perfect_and_degenerate() {
        let r = metrics(ConfusionMatrix::new(4, 6, 0, 0)).unwrap();
        for v in [r.accuracy, r.precision, r.recall, r.f1, r.kappa, r.auc] {
            assert_eq!(v, 1.0);
        }
        assert!(!r.degenerate.any());
        let r = metrics(ConfusionMatrix::new(0, 5, 0, 5)).unwrap();
        assert!(r.degenerate.precision && r.degenerate.f1);
        assert_eq!((r.precision, r.f1, r.accuracy), (0.0, 0.0, 0.5));
        let r = metrics(ConfusionMatrix::new(0, 7, 0, 0)).unwrap();
        assert!(r.degenerate.kappa && r.degenerate.auc);
        assert_eq!(r.kappa, 1.0);
        assert!(metrics(ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn roc_auc() {
        assert_eq!(auc_roc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(auc_roc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert!(auc_roc(&[0.5], &[1]).is_err());
    }

    #[test]
    fn single_report_table() {
        let r = metrics(ConfusionMatrix::new(3, 3, 1, 1)).unwrap();
        let t = report_table(&[("cnn".into(), r)]);
        assert_eq!(t.lines().count(), 11);
        assert!(t.lines().any(|l| l.starts_with("Accuracy") && l.ends_with("0.750")));
        assert!(!t.contains('*'));
    }
}
