use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;

use abusecnn::cnn::load_checkpoint;
use abusecnn::corpus::{read_jsonl, Vocabulary};
use abusecnn::embedding::load_vectors;
use abusecnn::eval::from_csv;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

const SMALL: &str = "\
embedding.dim=8
pretrain.dim=8
pretrain.epochs=2
cnn.filters=2:4:0.2,3:4:0.2
cnn.dense_units=8
cnn.max_len=16
cnn.epochs=4
cnn.patience=2
baselines.dnn_epochs=5
augment.nmf_rank=3
augment.nmf_iterations=30
";

/// Writes a config into `dir` with the fixture data paths and extra lines.
fn config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "seed=11\ndata.labelled={}\ndata.unlabelled={}\n{SMALL}{extra}",
        fixture("labelled.jsonl").display(),
        fixture("unlabelled.jsonl").display(),
    );
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abusecnn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .to_string()
}

#[test]
fn pretrain_default_dim_and_rerun_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("c.conf");
    fs::write(
        &conf,
        format!("data.unlabelled={}\npretrain.epochs=1\n", fixture("unlabelled.jsonl").display()),
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["pretrain", "--config", s(&conf), "--out", s(&a)]);
    ok(&["pretrain", "--config", s(&conf), "--out", s(&b)]);
    let va = fs::read(a.join("vectors.txt")).unwrap();
    assert_eq!(va, fs::read(b.join("vectors.txt")).unwrap());
    let header = String::from_utf8_lossy(&va).lines().next().unwrap().to_string();
    let emb = load_vectors(&a.join("vectors.txt")).unwrap();
    assert_eq!(header, format!("{} 200", emb.vocab().len()));
    assert_eq!(
        fs::read(a.join("pretrain.manifest")).unwrap(),
        fs::read(b.join("pretrain.manifest")).unwrap()
    );
    // one in ten unlabelled fixture tweets has no keyword
    assert_eq!(manifest_value(&a.join("pretrain.manifest"), "records_kept"), "270");
}

#[test]
fn pretrain_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("c.conf");
    fs::write(&conf, format!("data.unlabelled={}\n", fixture("no_keywords.jsonl").display())).unwrap();
    let out = run(&["pretrain", "--config", s(&conf), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty pre-filtered corpus"));

    fs::write(&conf, "data.unlabelled=missing/corpus.jsonl\n").unwrap();
    let out = run(&["pretrain", "--config", s(&conf)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing/corpus.jsonl"));
}

#[test]
fn train_writes_checkpoint_history_and_split_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = config(tmp.path(), "embedding.mode=random\n");
    let out = tmp.path().join("out");
    ok(&["train", "--config", s(&conf), "--out", s(&out)]);
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.lines().count() >= 2);
    let m = out.join("train.manifest");
    assert_eq!(manifest_value(&m, "split.train_positive"), "40");
    assert_eq!(manifest_value(&m, "split.train_negative"), "40");
    assert_eq!(manifest_value(&m, "split.test_positive"), "10");
    assert_eq!(manifest_value(&m, "split.test_negative"), "10");
    assert_eq!(read_jsonl(&out.join("test.jsonl")).unwrap().len(), 20);
    let vocab = Arc::new(Vocabulary::from_tsv(&fs::read_to_string(out.join("vocab.tsv")).unwrap()).unwrap());
    load_checkpoint(&out.join("model.ckpt"), vocab).unwrap();
}

#[test]
fn frozen_domain_vectors_survive_training() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = config(tmp.path(), "embedding.mode=domain\nembedding.trainable=false\n");
    let out = tmp.path().join("out");
    ok(&["pretrain", "--config", s(&conf), "--out", s(&out)]);
    ok(&["train", "--config", s(&conf), "--out", s(&out)]);
    let source = load_vectors(&out.join("vectors.txt")).unwrap();
    let vocab = Arc::new(Vocabulary::from_tsv(&fs::read_to_string(out.join("vocab.tsv")).unwrap()).unwrap());
    let model = load_checkpoint(&out.join("model.ckpt"), vocab.clone()).unwrap();
    assert!(!model.embedding().trainable());
    let mut compared = 0;
    for (tok, _) in &vocab.entries()[2..] {
        if let Some(v) = source.vector(tok) {
            assert_eq!(model.embedding().vector(tok).unwrap(), v, "{tok}");
            compared += 1;
        }
    }
    assert!(compared > 20);
}

#[test]
fn invalid_config_fails_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = config(tmp.path(), "cnn.dense_units=0\n");
    let out = tmp.path().join("out");
    let res = run(&["train", "--config", s(&conf), "--out", s(&out)]);
    assert!(!res.status.success());
    assert!(!out.exists());
    let conf = config(tmp.path(), "embedding.mode=external\n");
    assert!(!run(&["train", "--config", s(&conf)]).status.success());
}

#[test]
fn eval_counts_reproduce_reference_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["eval", "--counts", s(&fixture("model_counts.csv")), "--out", s(tmp.path())]);
    let csv = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    let reports = from_csv(&csv).unwrap();
    assert_eq!(reports.len(), 9);
    let knn = &reports.iter().find(|(n, _)| n == "kNN").unwrap().1;
    let got = [knn.accuracy, knn.precision, knn.recall, knn.f1, knn.kappa, knn.auc];
    for (g, w) in got.iter().zip([0.550, 0.617, 0.263, 0.369, 0.100, 0.550]) {
        assert!((g - w).abs() <= 0.0005);
    }
    let table = fs::read_to_string(tmp.path().join("table.txt")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("Accuracy") && l.contains("0.762*")));
}

#[test]
fn eval_runs_cnn_and_baselines_and_checks_vocab_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = config(tmp.path(), "embedding.mode=random\n");
    let out = tmp.path().join("out");
    ok(&["train", "--config", s(&conf), "--out", s(&out)]);
    ok(&["eval", "--config", s(&conf), "--out", s(&out)]);
    let reports = from_csv(&fs::read_to_string(out.join("metrics.csv")).unwrap()).unwrap();
    let names: Vec<&str> = reports.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["CNN", "DNN", "MNB", "kNN", "RC"]);
    for (_, r) in &reports {
        assert_eq!(r.counts.total(), 20);
    }

    let vocab_path = out.join("vocab.tsv");
    let mut vocab = fs::read_to_string(&vocab_path).unwrap();
    vocab.push_str("zzzextra\t1\n");
    fs::write(&vocab_path, vocab).unwrap();
    let res = run(&["eval", "--config", s(&conf), "--out", s(&out)]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("vocabulary hash mismatch"), "{err}");
    let hashes = err.split_whitespace().filter(|w| w.trim_end_matches(',').len() == 64).count();
    assert_eq!(hashes, 2, "{err}");
}

#[test]
fn augment_suite_sizes_and_identity_copy() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = config(tmp.path(), "embedding.mode=domain\n");
    let out = tmp.path().join("out");
    ok(&["pretrain", "--config", s(&conf), "--out", s(&out)]);
    ok(&["augment", "--config", s(&conf), "--out", s(&out)]);
    let dir = out.join("augment");
    assert_eq!(
        fs::read(dir.join("AT0.jsonl")).unwrap(),
        fs::read(fixture("labelled.jsonl")).unwrap()
    );
    let size = |p: &str| read_jsonl(&dir.join(format!("{p}.jsonl"))).unwrap().len();
    assert_eq!(size("AT1"), 200);
    assert_eq!(size("AT2"), 200);
    assert_eq!(size("AT3"), 100);
    assert_eq!(size("AT4"), 100);
    assert_eq!(size("AT5"), 106);
    assert_eq!(size("AT6"), 200);
    for p in ["AT0", "AT1", "AT2", "AT3", "AT4", "AT5", "AT6"] {
        let seed = manifest_value(&dir.join(format!("{p}.manifest")), "seed");
        assert!(seed.parse::<u64>().is_ok());
    }
}

#[test]
fn crossval_two_folds_on_four_records() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("c.conf");
    fs::write(
        &conf,
        format!("data.labelled={}\n{SMALL}embedding.mode=random\ncrossval.k=2\n", fixture("tiny.jsonl").display()),
    )
    .unwrap();
    ok(&["crossval", "--config", s(&conf), "--out", s(tmp.path())]);
    let folds = from_csv(&fs::read_to_string(tmp.path().join("folds.csv")).unwrap()).unwrap();
    assert_eq!(folds.len(), 2);
    let summary = fs::read_to_string(tmp.path().join("crossval_summary.csv")).unwrap();
    let value = |key: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    let mean = (folds[0].1.accuracy + folds[1].1.accuracy) / 2.0;
    assert!((value("mean") - mean).abs() <= 1e-12);
    assert!(value("std") >= 0.0);
}

#[test]
fn predict_reads_stdin_and_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = config(tmp.path(), "embedding.mode=random\n");
    let out = tmp.path().join("out");
    ok(&["train", "--config", s(&conf), "--out", s(&out)]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_abusecnn"))
        .args(["predict", "--model", s(&out)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"{\"id\":\"a\",\"text\":\"you stupid slut\"}\n{\"id\":\"b\",\"text\":\"\"}\n")
        .unwrap();
    let res = child.wait_with_output().unwrap();
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id,probability,label");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        let p: f64 = f[1].parse().unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(f[2], if p >= 0.5 { "1" } else { "0" });
    }
}

#[test]
fn seeded_train_eval_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = config(tmp.path(), "embedding.mode=random\n");
    let mut csvs = Vec::new();
    for run_dir in ["r1", "r2"] {
        let out = tmp.path().join(run_dir);
        ok(&["train", "--config", s(&conf), "--out", s(&out)]);
        ok(&["eval", "--config", s(&conf), "--out", s(&out)]);
        csvs.push(fs::read(out.join("metrics.csv")).unwrap());
        assert_eq!(manifest_value(&out.join("train.manifest"), "seed"), "11");
    }
    assert_eq!(csvs[0], csvs[1]);
    let out = tmp.path().join("r3");
    ok(&["train", "--config", s(&conf), "--out", s(&out), "--seed", "12"]);
    assert_eq!(manifest_value(&out.join("train.manifest"), "seed"), "12");
}
