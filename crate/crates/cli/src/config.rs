use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use abusecnn::augment::{AugmentPolicy, PolicyKind};
use abusecnn::baselines::{BowScheme, DnnConfig};
use abusecnn::cnn::CnnConfig;
use abusecnn::embedding::{CbowConfig, Objective};
use abusecnn::numerics::Rng;
use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// Vectors produced by `pretrain` on the pre-filtered unlabelled corpus.
    Domain,
    /// A vector file from some general corpus.
    External,
    Random,
}

impl EmbeddingMode {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "domain" => Some(Self::Domain),
            "external" => Some(Self::External),
            "random" => Some(Self::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Baseline {
    Dnn,
    Mnb,
    Knn,
    Ridge,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dnn => "DNN",
            Self::Mnb => "MNB",
            Self::Knn => "kNN",
            Self::Ridge => "RC",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Some(Self::Dnn),
            "mnb" => Some(Self::Mnb),
            "knn" => Some(Self::Knn),
            "ridge" | "rc" => Some(Self::Ridge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingSettings {
    pub mode: EmbeddingMode,
    pub trainable: bool,
    pub vectors: Option<PathBuf>,
    /// Dimension of randomly initialised vectors.
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct PretrainSettings {
    pub word2vec: CbowConfig,
    pub objective: Objective,
    pub min_count: u64,
}

#[derive(Debug, Clone)]
pub struct BaselineSettings {
    pub models: Vec<Baseline>,
    pub scheme: BowScheme,
    pub mnb_scheme: BowScheme,
    pub mnb_alpha: f64,
    pub knn_k: usize,
    pub ridge_lambda: f64,
    pub dnn: DnnConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub labelled: Option<PathBuf>,
    pub unlabelled: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub embedding: EmbeddingSettings,
    pub pretrain: PretrainSettings,
    pub cnn: CnnConfig,
    pub vocab_min_count: u64,
    pub baselines: BaselineSettings,
    pub augment: Vec<AugmentPolicy>,
    pub test_fraction: f64,
    /// Share of the training portion held out for early stopping.
    pub validation_fraction: f64,
    pub folds: usize,
    effective: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "seed",
    "output.dir",
    "data.labelled",
    "data.unlabelled",
    "data.keywords",
    "embedding.mode",
    "embedding.trainable",
    "embedding.vectors",
    "embedding.dim",
    "pretrain.dim",
    "pretrain.window",
    "pretrain.negatives",
    "pretrain.epochs",
    "pretrain.initial_lr",
    "pretrain.min_lr",
    "pretrain.subsample",
    "pretrain.objective",
    "pretrain.min_count",
    "vocab.min_count",
    "baselines",
    "baselines.scheme",
    "baselines.mnb_scheme",
    "baselines.mnb_alpha",
    "baselines.knn_k",
    "baselines.ridge_lambda",
    "baselines.dnn_epochs",
    "baselines.dnn_learning_rate",
    "augment.policies",
    "augment.replace_prob",
    "augment.neighbors",
    "augment.expansion",
    "augment.theta",
    "augment.min_count",
    "augment.nmf_rank",
    "augment.nmf_iterations",
    "augment.top_terms",
    "split.test_fraction",
    "split.validation_fraction",
    "crossval.k",
];

const CNN_KEYS: &[&str] = &[
    "filters",
    "dense_units",
    "input_dropout",
    "dense_dropout",
    "word_dropout",
    "threshold",
    "max_len",
    "batch_size",
    "epochs",
    "patience",
    "learning_rate",
];

/// Parses flat `key=value` lines; `#` starts a comment line.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        let known = KEYS.contains(&k)
            || k.strip_prefix("cnn.").is_some_and(|c| CNN_KEYS.contains(&c));
        if !known {
            bail!("config line {}: unknown key `{k}`", i + 1);
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            bail!("config line {}: duplicate key `{k}`", i + 1);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    kv: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.kv.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| anyhow!("bad value `{v}` for config key `{key}`")),
            None => Ok(default),
        }
    }

    fn path(&self, key: &str, base: &Path) -> Result<Option<PathBuf>> {
        let Some(v) = self.kv.get(key) else {
            return Ok(None);
        };
        let p = base.join(v);
        if !p.exists() {
            bail!("config key `{key}`: {} does not exist", p.display());
        }
        Ok(Some(p))
    }
}

fn scheme(s: &str) -> Result<BowScheme> {
    BowScheme::parse(s).ok_or_else(|| anyhow!("unknown bag-of-words scheme `{s}` (counts|tfidf)"))
}

impl ExperimentConfig {
    pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_kv(parse_kv(&text)?, base, seed, out)
    }

    /// Builds a config from parsed pairs. Relative paths resolve against `base`.
    pub fn from_kv(
        mut kv: BTreeMap<String, String>,
        base: &Path,
        seed: Option<u64>,
        out: Option<&Path>,
    ) -> Result<Self> {
        if let Some(s) = seed {
            kv.insert("seed".into(), s.to_string());
        }
        let r = Reader { kv: &kv };
        let seed: u64 = r.get("seed", 1)?;
        let out_dir = match out {
            Some(o) => o.to_path_buf(),
            None => base.join(r.get("output.dir", "out".to_string())?),
        };

        let mode_text: String = r.get("embedding.mode", "domain".to_string())?;
        let mode = EmbeddingMode::parse(&mode_text)
            .ok_or_else(|| anyhow!("unknown embedding.mode `{mode_text}` (domain|external|random)"))?;
        let vectors = r.path("embedding.vectors", base)?;
        match (mode, &vectors) {
            (EmbeddingMode::External, None) => bail!("embedding.mode=external requires embedding.vectors"),
            (EmbeddingMode::Random, Some(_)) => bail!("embedding.vectors is set but embedding.mode=random"),
            _ => {}
        }
        let embedding = EmbeddingSettings {
            mode,
            trainable: r.get("embedding.trainable", true)?,
            vectors,
            dim: r.get("embedding.dim", 200)?,
        };
        if embedding.dim == 0 {
            bail!("embedding.dim must be >= 1");
        }

        let d = CbowConfig::default();
        let objective = match r.get("pretrain.objective", "cbow".to_string())?.as_str() {
            "cbow" => Objective::Cbow,
            "skipgram" => Objective::SkipGram,
            other => bail!("unknown pretrain.objective `{other}` (cbow|skipgram)"),
        };
        let pretrain = PretrainSettings {
            word2vec: CbowConfig {
                dim: r.get("pretrain.dim", d.dim)?,
                window: r.get("pretrain.window", d.window)?,
                negatives: r.get("pretrain.negatives", d.negatives)?,
                epochs: r.get("pretrain.epochs", d.epochs)?,
                initial_lr: r.get("pretrain.initial_lr", d.initial_lr)?,
                min_lr: r.get("pretrain.min_lr", d.min_lr)?,
                subsample_threshold: r.get("pretrain.subsample", d.subsample_threshold)?,
                seed: Rng::derive_seed(seed, "pretrain"),
            },
            objective,
            min_count: r.get("pretrain.min_count", 1)?,
        };

        let mut cnn_kv = CnnConfig::default().to_kv();
        for (k, v) in &kv {
            if let Some(c) = k.strip_prefix("cnn.") {
                cnn_kv.insert(c.to_string(), v.clone());
            }
        }
        cnn_kv.insert("seed".into(), Rng::derive_seed(seed, "cnn").to_string());
        let cnn = CnnConfig::from_kv(&cnn_kv).context("cnn settings")?;

        let models = r
            .get("baselines", "dnn,mnb,knn,ridge".to_string())?
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Baseline::parse(s).ok_or_else(|| anyhow!("unknown baseline `{s}` (dnn|mnb|knn|ridge)")))
            .collect::<Result<Vec<_>>>()?;
        let dd = DnnConfig::default();
        let baselines = BaselineSettings {
            models,
            scheme: scheme(&r.get("baselines.scheme", "tfidf".to_string())?)?,
            mnb_scheme: scheme(&r.get("baselines.mnb_scheme", "tfidf".to_string())?)?,
            mnb_alpha: r.get("baselines.mnb_alpha", 1.0)?,
            knn_k: r.get("baselines.knn_k", 5)?,
            ridge_lambda: r.get("baselines.ridge_lambda", 1.0)?,
            dnn: DnnConfig {
                epochs: r.get("baselines.dnn_epochs", dd.epochs)?,
                learning_rate: r.get("baselines.dnn_learning_rate", dd.learning_rate)?,
                seed: Rng::derive_seed(seed, "dnn"),
                ..dd
            },
        };

        let augment = Self::augment_policies(&r, seed)?;

        let test_fraction = r.get("split.test_fraction", 0.2)?;
        let validation_fraction = r.get("split.validation_fraction", 0.1)?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            bail!("split.test_fraction must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&validation_fraction) {
            bail!("split.validation_fraction must lie in [0, 1)");
        }
        let folds = r.get("crossval.k", 10)?;
        if folds < 2 {
            bail!("crossval.k must be >= 2");
        }

        let mut effective = kv.clone();
        for (k, v) in cnn_kv {
            effective.insert(format!("cnn.{k}"), v);
        }
        effective.remove("output.dir");

        Ok(Self {
            seed,
            out_dir,
            labelled: r.path("data.labelled", base)?,
            unlabelled: r.path("data.unlabelled", base)?,
            keywords: r.path("data.keywords", base)?,
            embedding,
            pretrain,
            cnn,
            vocab_min_count: r.get("vocab.min_count", 1)?,
            baselines,
            augment,
            test_fraction,
            validation_fraction,
            folds,
            effective,
        })
    }

    fn augment_policies(r: &Reader, seed: u64) -> Result<Vec<AugmentPolicy>> {
        let names: String = r.get("augment.policies", "AT0,AT1,AT2,AT3,AT4,AT5,AT6".to_string())?;
        let mut out = Vec::new();
        for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let kind = PolicyKind::parse(name)?;
            let mut policy = AugmentPolicy::with_defaults(kind, Rng::derive_seed(seed, kind.name()));
            let p = &mut policy.params;
            macro_rules! overlay {
                ($($field:ident),*) => {$(
                    if p.$field.is_some() {
                        let key = concat!("augment.", stringify!($field));
                        if r.kv.contains_key(key) {
                            p.$field = Some(r.get(key, p.$field.unwrap())?);
                        }
                    }
                )*};
            }
            overlay!(replace_prob, neighbors, expansion, theta, min_count, nmf_rank, nmf_iterations, top_terms);
            policy.validate()?;
            out.push(policy);
        }
        Ok(out)
    }

    /// Every effective setting except the output directory, sorted.
    pub fn effective(&self) -> &BTreeMap<String, String> {
        &self.effective
    }

    /// SHA-256 over the sorted effective settings.
    pub fn hash(&self) -> String {
        let mut canon = String::new();
        for (k, v) in &self.effective {
            let _ = writeln!(canon, "{k}={v}");
        }
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| anyhow!("config key `{key}` is required for this command"))
    }

    /// Vector file for the domain and external modes.
    pub fn vectors_path(&self) -> Option<PathBuf> {
        match self.embedding.mode {
            EmbeddingMode::Random => None,
            EmbeddingMode::External => self.embedding.vectors.clone(),
            EmbeddingMode::Domain => Some(
                self.embedding
                    .vectors
                    .clone()
                    .unwrap_or_else(|| self.out_dir.join("vectors.txt")),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_kv(parse_kv(text)?, Path::new("."), None, None)
    }

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = load("").unwrap();
        assert_eq!(c.cnn.total_filters(), 1024);
        assert_eq!(c.cnn.batch_size, 32);
        assert_eq!(c.folds, 10);
        assert_eq!(c.test_fraction, 0.2);
        assert_eq!(c.augment.len(), 7);
        assert_eq!(c.baselines.models.len(), 4);
        assert_eq!(c.pretrain.word2vec.dim, 200);
    }

    #[test]
    fn cnn_keys_overlay_defaults() {
        let c = load("cnn.batch_size=8\ncnn.filters=2:4:0").unwrap();
        assert_eq!(c.cnn.batch_size, 8);
        assert_eq!(c.cnn.total_filters(), 4);
        assert_eq!(c.cnn.dense_units, 256);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(load("cnn.bach_size=8").is_err());
        assert!(load("seed=1\nseed=2").is_err());
        assert!(load("no equals sign").is_err());
    }

    #[test]
    fn external_mode_needs_vectors() {
        let err = load("embedding.mode=external").unwrap_err();
        assert!(err.to_string().contains("embedding.vectors"));
    }

    #[test]
    fn missing_referenced_path_is_reported() {
        let err = load("data.labelled=/nonexistent/x.jsonl").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.jsonl"));
    }

    #[test]
    fn seed_override_changes_hash_and_stage_seeds() {
        let a = ExperimentConfig::from_kv(parse_kv("seed=3").unwrap(), Path::new("."), None, None).unwrap();
        let b = ExperimentConfig::from_kv(parse_kv("seed=3").unwrap(), Path::new("."), Some(4), None).unwrap();
        assert_eq!(b.seed, 4);
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.cnn.seed, b.cnn.seed);
        let c = ExperimentConfig::from_kv(parse_kv("seed=3").unwrap(), Path::new("."), None, Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn augment_overrides_apply_where_relevant() {
        let c = load("augment.replace_prob=0.5\naugment.policies=AT0,AT1,AT3").unwrap();
        assert_eq!(c.augment.len(), 3);
        assert_eq!(c.augment[1].params.replace_prob, Some(0.5));
        assert_eq!(c.augment[2].params.replace_prob, None);
    }
}
