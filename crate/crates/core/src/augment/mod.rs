//! Training-set augmentation policies AT0-AT6 built on embedding
//! neighbourhoods and per-class NMF topics.

mod lexicon;
mod nmf;

pub use lexicon::{discriminative_words, DiscriminativeLexicon};
pub use nmf::{doc_term_matrix, nmf, NmfFactors, NMF_EPS};

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{CorpusError, Example, LabeledDataset, RESERVED};
use crate::embedding::EmbeddingMatrix;
use crate::numerics::{NumericsError, Rng};
use nmf::top_indices;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("matrix entry ({0}, {1}) is negative or not finite")]
    NegativeEntry(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{kind}: {message}")]
    PolicyMismatch { kind: PolicyKind, message: String },
    #[error("class {0} has no records")]
    EmptyClass(u8),
    #[error("only {have} candidate words available, {need} required")]
    TooFewCandidates { have: usize, need: usize },
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, AugmentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    At0,
    At1,
    At2,
    At3,
    At4,
    At5,
    At6,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        Self::At0,
        Self::At1,
        Self::At2,
        Self::At3,
        Self::At4,
        Self::At5,
        Self::At6,
    ];

    pub fn name(self) -> &'static str {
        ["AT0", "AT1", "AT2", "AT3", "AT4", "AT5", "AT6"][self as usize]
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| AugmentError::UnknownPolicy(s.to_string()))
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Policy parameters; which ones must be set depends on the kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyParams {
    /// Per-word replacement probability (AT1, AT2).
    pub replace_prob: Option<f64>,
    /// Neighbour pool size (AT1, AT2) or words per artificial tweet (AT6).
    pub neighbors: Option<usize>,
    /// Words added to each tweet (AT3, AT4).
    pub expansion: Option<usize>,
    pub theta: Option<f64>,
    pub min_count: Option<u64>,
    pub nmf_rank: Option<usize>,
    pub nmf_iterations: Option<usize>,
    /// Terms per topic tweet (AT5).
    pub top_terms: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    pub kind: PolicyKind,
    pub params: PolicyParams,
    pub seed: u64,
}

impl AugmentPolicy {
    pub fn with_defaults(kind: PolicyKind, seed: u64) -> Self {
        let mut p = PolicyParams::default();
        match kind {
            PolicyKind::At0 => {}
            PolicyKind::At1 => {
                p.replace_prob = Some(0.2);
                p.neighbors = Some(5);
            }
            PolicyKind::At2 => {
                p.replace_prob = Some(0.2);
                p.neighbors = Some(5);
                p.theta = Some(2.0);
                p.min_count = Some(3);
            }
            PolicyKind::At3 => p.expansion = Some(5),
            PolicyKind::At4 => {
                p.expansion = Some(3);
                p.nmf_rank = Some(20);
                p.nmf_iterations = Some(200);
            }
            PolicyKind::At5 => {
                p.nmf_rank = Some(20);
                p.nmf_iterations = Some(200);
                p.top_terms = Some(10);
            }
            PolicyKind::At6 => p.neighbors = Some(10),
        }
        Self { kind, params: p, seed }
    }

    /// Parameter names as `(name, value)` in a fixed order; unset ones omitted.
    pub fn params_kv(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let fields: [(&str, Option<String>); 8] = [
            ("replace_prob", p.replace_prob.map(|v| v.to_string())),
            ("neighbors", p.neighbors.map(|v| v.to_string())),
            ("expansion", p.expansion.map(|v| v.to_string())),
            ("theta", p.theta.map(|v| v.to_string())),
            ("min_count", p.min_count.map(|v| v.to_string())),
            ("nmf_rank", p.nmf_rank.map(|v| v.to_string())),
            ("nmf_iterations", p.nmf_iterations.map(|v| v.to_string())),
            ("top_terms", p.top_terms.map(|v| v.to_string())),
        ];
        fields.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let required: &[&str] = match self.kind {
            PolicyKind::At0 => &[],
            PolicyKind::At1 => &["replace_prob", "neighbors"],
            PolicyKind::At2 => &["replace_prob", "neighbors", "theta", "min_count"],
            PolicyKind::At3 => &["expansion"],
            PolicyKind::At4 => &["expansion", "nmf_rank", "nmf_iterations"],
            PolicyKind::At5 => &["nmf_rank", "nmf_iterations", "top_terms"],
            PolicyKind::At6 => &["neighbors"],
        };
        let mismatch = |message: String| {
            Err(AugmentError::PolicyMismatch {
                kind: self.kind,
                message,
            })
        };
        let set: Vec<&str> = self.params_kv().into_iter().map(|(k, _)| k).collect();
        if let Some(extra) = set.iter().find(|k| !required.contains(k)) {
            return mismatch(format!("parameter `{extra}` does not apply"));
        }
        if let Some(missing) = required.iter().find(|k| !set.contains(k)) {
            return mismatch(format!("parameter `{missing}` is required"));
        }
        let p = &self.params;
        if p.replace_prob.is_some_and(|r| !(0.0..=1.0).contains(&r)) {
            return mismatch("replace_prob must lie in [0, 1]".into());
        }
        if p.theta.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return mismatch("theta must be > 0".into());
        }
        for (name, v) in [
            ("neighbors", p.neighbors),
            ("expansion", p.expansion),
            ("nmf_rank", p.nmf_rank),
            ("top_terms", p.top_terms),
        ] {
            if v == Some(0) {
                return mismatch(format!("{name} must be >= 1"));
            }
        }
        Ok(())
    }
}

fn emb_id(emb: &EmbeddingMatrix, token: &str) -> Option<usize> {
    emb.vocab().id(token).filter(|&id| id >= RESERVED)
}

/// Nearest embedding neighbours of every distinct in-vocabulary token.
fn neighbor_table(data: &LabeledDataset, emb: &EmbeddingMatrix, k: usize) -> HashMap<usize, Vec<usize>> {
    let ids: BTreeSet<usize> = data
        .token_seqs()
        .flatten()
        .filter_map(|t| emb_id(emb, t))
        .collect();
    let ids: Vec<usize> = ids.into_iter().collect();
    ids.par_iter()
        .map(|&id| {
            let hits = emb
                .nearest_to_vector(emb.vectors().row(id), k, |j| j == id)
                .unwrap_or_default();
            (id, hits.into_iter().map(|(j, _)| j).collect())
        })
        .collect()
}

fn token_of(emb: &EmbeddingMatrix, id: usize) -> String {
    emb.vocab().token(id).expect("id from this vocabulary").to_string()
}

/// `k` words closest to the tweet's mean vector, excluding its own words.
/// Falls back to vocabulary order when no word of the tweet has a vector.
fn tweet_neighbors(tokens: &[String], emb: &EmbeddingMatrix, k: usize) -> Result<Vec<String>> {
    let own: BTreeSet<usize> = tokens.iter().filter_map(|t| emb_id(emb, t)).collect();
    let mut mean = vec![0.0; emb.dim()];
    for &id in &own {
        mean.iter_mut().zip(emb.vectors().row(id)).for_each(|(m, v)| *m += v);
    }
    let own_tokens: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
    let skip = |j: usize| own.contains(&j) || own_tokens.contains(emb.vocab().token(j).unwrap_or_default());
    let ids: Vec<usize> = match emb.nearest_to_vector(&mean, k, skip) {
        Ok(hits) => hits.into_iter().map(|(j, _)| j).collect(),
        Err(_) => (RESERVED..emb.vocab().len()).filter(|&j| !skip(j)).take(k).collect(),
    };
    if ids.len() < k {
        return Err(AugmentError::TooFewCandidates { have: ids.len(), need: k });
    }
    Ok(ids.into_iter().map(|j| token_of(emb, j)).collect())
}

fn replace_words(
    data: &LabeledDataset,
    emb: &EmbeddingMatrix,
    prob: f64,
    k: usize,
    eligible: impl Fn(u8, &str) -> bool,
    rng: &mut Rng,
) -> Vec<Vec<String>> {
    let table = neighbor_table(data, emb, k);
    data.records()
        .iter()
        .map(|r| {
            r.tokens
                .iter()
                .map(|t| {
                    if !eligible(r.label, t) || rng.uniform() >= prob {
                        return t.clone();
                    }
                    match emb_id(emb, t).and_then(|id| table.get(&id)).filter(|n| !n.is_empty()) {
                        Some(pool) => token_of(emb, pool[rng.below(pool.len())]),
                        None => t.clone(),
                    }
                })
                .collect()
        })
        .collect()
}

struct ClassTopics {
    indices: Vec<usize>,
    terms: Vec<String>,
    factors: NmfFactors,
}

/// NMF over each class's doc-term matrix; `None` for a class with no terms.
fn class_topics(
    data: &LabeledDataset,
    rank: usize,
    iterations: usize,
    seed: u64,
    clamp_rank: bool,
) -> Result<[Option<ClassTopics>; 2]> {
    let mut out: [Option<ClassTopics>; 2] = [None, None];
    for class in 0..2u8 {
        let indices: Vec<usize> = (0..data.len()).filter(|&i| data.records()[i].label == class).collect();
        let docs: Vec<&[String]> = indices.iter().map(|&i| data.records()[i].tokens.as_slice()).collect();
        let (v, terms) = doc_term_matrix(&docs);
        if terms.is_empty() {
            if clamp_rank {
                continue;
            }
            return Err(AugmentError::EmptyClass(class));
        }
        let r = if clamp_rank { rank.min(v.rows()).min(v.cols()) } else { rank };
        let factors = nmf(&v, r, iterations, Rng::derive_seed(seed, &format!("class{class}")))?;
        out[class as usize] = Some(ClassTopics { indices, terms, factors });
    }
    Ok(out)
}

fn derived_id(id: &str, kind: PolicyKind) -> String {
    format!("{id}~{}", kind.name().to_ascii_lowercase())
}

fn with_appended(data: &LabeledDataset, kind: PolicyKind, extra: Vec<Vec<String>>) -> Result<LabeledDataset> {
    let mut records = data.records().to_vec();
    for (r, tokens) in data.records().iter().zip(extra) {
        records.push(Example {
            id: derived_id(&r.id, kind),
            tokens,
            label: r.label,
        });
    }
    Ok(LabeledDataset::new(records)?)
}

fn with_replaced(data: &LabeledDataset, tokens: Vec<Vec<String>>) -> Result<LabeledDataset> {
    let records = data
        .records()
        .iter()
        .zip(tokens)
        .map(|(r, tokens)| Example {
            id: r.id.clone(),
            tokens,
            label: r.label,
        })
        .collect();
    Ok(LabeledDataset::new(records)?)
}

/// Applies one policy. AT1, AT2 and AT6 append one artificial tweet per
/// source tweet; AT3 and AT4 expand tweets in place; AT5 appends one tweet
/// per NMF topic of each class.
pub fn augment(data: &LabeledDataset, policy: &AugmentPolicy, emb: &EmbeddingMatrix) -> Result<LabeledDataset> {
    policy.validate()?;
    let p = &policy.params;
    let mut rng = Rng::derive(policy.seed, policy.kind.name());
    match policy.kind {
        PolicyKind::At0 => Ok(data.clone()),
        PolicyKind::At1 => {
            let prob = p.replace_prob.expect("validated");
            let extra = replace_words(data, emb, prob, p.neighbors.expect("validated"), |_, _| true, &mut rng);
            with_appended(data, policy.kind, extra)
        }
        PolicyKind::At2 => {
            let lexicon = discriminative_words(data, p.theta.expect("validated"), p.min_count.expect("validated"))?;
            let prob = p.replace_prob.expect("validated");
            let eligible = |label: u8, t: &str| lexicon.contains(label, t);
            let extra = replace_words(data, emb, prob, p.neighbors.expect("validated"), eligible, &mut rng);
            with_appended(data, policy.kind, extra)
        }
        PolicyKind::At3 => {
            let k = p.expansion.expect("validated");
            let tokens = data
                .records()
                .par_iter()
                .map(|r| {
                    let mut t = r.tokens.clone();
                    t.extend(tweet_neighbors(&r.tokens, emb, k)?);
                    Ok(t)
                })
                .collect::<Result<Vec<_>>>()?;
            with_replaced(data, tokens)
        }
        PolicyKind::At4 => {
            let k = p.expansion.expect("validated");
            let topics = class_topics(
                data,
                p.nmf_rank.expect("validated"),
                p.nmf_iterations.expect("validated"),
                policy.seed,
                true,
            )?;
            let mut tokens: Vec<Vec<String>> = data.records().iter().map(|r| r.tokens.clone()).collect();
            for ct in topics.iter().flatten() {
                for (row, &i) in ct.indices.iter().enumerate() {
                    let weights = ct.factors.w.row(row);
                    let topic = top_indices(weights, 1, |_| false)[0];
                    let own: BTreeSet<&str> = data.records()[i].tokens.iter().map(String::as_str).collect();
                    let h = ct.factors.h.row(topic);
                    let add = top_indices(h, k, |j| h[j] <= 0.0 || own.contains(ct.terms[j].as_str()));
                    tokens[i].extend(add.into_iter().map(|j| ct.terms[j].clone()));
                }
            }
            with_replaced(data, tokens)
        }
        PolicyKind::At5 => {
            let rank = p.nmf_rank.expect("validated");
            let top = p.top_terms.expect("validated");
            let topics = class_topics(data, rank, p.nmf_iterations.expect("validated"), policy.seed, false)?;
            let mut records = data.records().to_vec();
            for (class, ct) in topics.iter().enumerate() {
                let ct = ct.as_ref().expect("both classes factorised");
                for t in 0..ct.factors.rank {
                    let words = top_indices(ct.factors.h.row(t), top, |_| false);
                    records.push(Example {
                        id: format!("~at5-c{class}-t{t}"),
                        tokens: words.into_iter().map(|j| ct.terms[j].clone()).collect(),
                        label: class as u8,
                    });
                }
            }
            Ok(LabeledDataset::new(records)?)
        }
        PolicyKind::At6 => {
            let k = p.neighbors.expect("validated");
            let extra = data
                .records()
                .par_iter()
                .map(|r| tweet_neighbors(&r.tokens, emb, k))
                .collect::<Result<Vec<_>>>()?;
            with_appended(data, policy.kind, extra)
        }
    }
}

/// AT0-AT6 with default parameters and per-policy seeds derived from `seed`.
pub fn default_suite(seed: u64) -> Vec<AugmentPolicy> {
    PolicyKind::ALL
        .into_iter()
        .map(|k| AugmentPolicy::with_defaults(k, Rng::derive_seed(seed, k.name())))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub policy: AugmentPolicy,
    pub dataset: LabeledDataset,
    pub input_size: usize,
}

impl SuiteEntry {
    pub fn output_size(&self) -> usize {
        self.dataset.len()
    }

    /// `key=value` manifest: policy, seed, parameters and sizes.
    pub fn manifest(&self) -> String {
        let mut out = format!("policy={}\nseed={}\n", self.policy.kind, self.policy.seed);
        for (k, v) in self.policy.params_kv() {
            let _ = writeln!(out, "param.{k}={v}");
        }
        let _ = writeln!(out, "input_size={}", self.input_size);
        let _ = writeln!(out, "output_size={}", self.output_size());
        out
    }
}

/// Runs every policy, in parallel, returning entries in the given order.
pub fn run_at_suite(
    data: &LabeledDataset,
    emb: &EmbeddingMatrix,
    policies: &[AugmentPolicy],
) -> Result<Vec<SuiteEntry>> {
    policies
        .par_iter()
        .map(|p| {
            Ok(SuiteEntry {
                policy: p.clone(),
                dataset: augment(data, p, emb)?,
                input_size: data.len(),
            })
        })
        .collect()
}
