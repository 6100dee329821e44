use abusecnn::eval::{confusion, from_csv, metrics, report_table, to_csv, ConfusionMatrix, MetricsReport};
use proptest::prelude::*;

struct Reference {
    group: String,
    name: String,
    counts: ConfusionMatrix,
    printed: [f64; 6],
    printed_text: Vec<String>,
}

fn references() -> Vec<Reference> {
    let text = include_str!("data/reference_counts.csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let n = |i: usize| f[i].parse::<u64>().unwrap();
            let printed: Vec<f64> = f[6..12].iter().map(|v| v.parse().unwrap()).collect();
            Reference {
                group: f[0].to_string(),
                name: f[1].to_string(),
                counts: ConfusionMatrix::new(n(2), n(3), n(4), n(5)),
                printed: printed.try_into().unwrap(),
                printed_text: f[6..12].iter().map(|s| s.to_string()).collect(),
            }
        })
        .collect()
}

fn values(r: &MetricsReport) -> [f64; 6] {
    [r.accuracy, r.precision, r.recall, r.f1, r.kappa, r.auc]
}

#[test]
fn every_reference_column_reproduces_its_printed_metrics() {
    let refs = references();
    assert_eq!(refs.len(), 21);
    for r in &refs {
        let m = metrics(r.counts).unwrap();
        for (got, want) in values(&m).iter().zip(&r.printed) {
            assert!((got - want).abs() <= 0.0005, "{} {}: {got} vs {want}", r.group, r.name);
        }
    }
}

#[test]
fn rendered_table_shows_printed_values() {
    for group in ["embeddings", "models", "augmentation"] {
        let refs: Vec<Reference> = references().into_iter().filter(|r| r.group == group).collect();
        let named: Vec<(String, MetricsReport)> =
            refs.iter().map(|r| (r.name.clone(), metrics(r.counts).unwrap())).collect();
        let table = report_table(&named);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 11);
        for (row, line) in lines[5..].iter().enumerate() {
            let cells: Vec<String> = line
                .split_whitespace()
                .skip(1)
                .map(|c| c.trim_end_matches('*').to_string())
                .collect();
            let expected: Vec<String> = refs.iter().map(|r| r.printed_text[row].clone()).collect();
            assert_eq!(cells, expected, "{group} row {row}");
        }
    }
}

#[test]
fn table_marks_best_values() {
    let named: Vec<(String, MetricsReport)> = references()
        .into_iter()
        .filter(|r| r.group == "models")
        .map(|r| (r.name, metrics(r.counts).unwrap()))
        .collect();
    let table = report_table(&named);
    let accuracy = table.lines().find(|l| l.starts_with("Accuracy")).unwrap();
    assert_eq!(accuracy.matches('*').count(), 1);
    assert!(accuracy.split_whitespace().nth(1).unwrap().ends_with('*'));
    let fp = table.lines().find(|l| l.starts_with("FP")).unwrap();
    assert!(fp.split_whitespace().nth(8).unwrap().ends_with('*'));
}

#[test]
fn csv_round_trips_and_rejects_tampering() {
    let named: Vec<(String, MetricsReport)> = references()
        .into_iter()
        .map(|r| (r.name, metrics(r.counts).unwrap()))
        .collect();
    let csv = to_csv(&named);
    assert!(csv.starts_with("name,tp,tn,fp,fn,accuracy,precision,recall,f1,kappa,auc\n"));
    assert_eq!(from_csv(&csv).unwrap(), named);
    let tampered = csv.replacen(",0.7", ",0.8", 1);
    assert!(from_csv(&tampered).is_err());
}

proptest! {
    #[test]
    fn class_swap_and_balance_properties(tp in 0u64..400, tn in 0u64..400, fp in 0u64..400, fneg in 0u64..400) {
        prop_assume!(tp + tn + fp + fneg > 0);
        let cm = ConfusionMatrix::new(tp, tn, fp, fneg);
        let m = metrics(cm).unwrap();
        let s = metrics(cm.swapped()).unwrap();
        prop_assert!((m.accuracy - s.accuracy).abs() < 1e-12);
        prop_assert!((m.kappa - s.kappa).abs() < 1e-12);
        if tn + fneg > 0 {
            prop_assert!((s.precision - tn as f64 / (tn + fneg) as f64).abs() < 1e-12);
        }
        prop_assert_eq!(metrics(m.counts).unwrap(), m);
        for v in values(&m) {
            prop_assert!(v.is_finite());
        }
        prop_assert!((-1.0..=1.0).contains(&m.kappa));
    }

    #[test]
    fn balanced_sets_have_auc_equal_accuracy(pos in 1u64..500, tp_frac in 0.0f64..=1.0, tn_frac in 0.0f64..=1.0) {
        let tp = (pos as f64 * tp_frac).round() as u64;
        let tn = (pos as f64 * tn_frac).round() as u64;
        let m = metrics(ConfusionMatrix::new(tp, tn, pos - tn, pos - tp)).unwrap();
        prop_assert!((m.auc - m.accuracy).abs() < 1e-12);
    }

    #[test]
    fn counts_partition_the_sequence(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..200)) {
        let (p, y): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        prop_assert_eq!(confusion(&p, &y).unwrap().total() as usize, p.len());
    }
}
