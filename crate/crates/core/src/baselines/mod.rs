//! Bag-of-words reference classifiers: a small feedforward network,
//! multinomial naive Bayes, k-nearest neighbours and a ridge classifier.

mod dnn;
mod knn;
mod mnb;
mod persist;
mod ridge;

pub use dnn::{train_dnn, DnnConfig, DnnModel};
pub use knn::{knn_predict, KnnModel};
pub use mnb::{train_mnb, MnbModel};
pub use ridge::{ridge_fit, RidgeModel};

use std::sync::Arc;

use thiserror::Error;

use crate::corpus::{Vocabulary, RESERVED};
use crate::numerics::{NumericsError, Tensor2D};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("class {0} has no training documents")]
    EmptyClass(u8),
    #[error("{features} feature vectors but {labels} labels")]
    LabelCount { features: usize, labels: usize },
    #[error("label must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("feature index {index} outside dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
    #[error("normal equations are singular; use lambda > 0")]
    Singular,
    #[error("bad model file: {0}")]
    BadModel(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

/// Sparse non-negative feature vector, sorted by feature index. Feature `i`
/// is vocabulary id `i + RESERVED`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BowVector {
    entries: Vec<(usize, f64)>,
}

impl BowVector {
    /// Sorts and merges duplicate indices by summing.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn dot(&self, other: &BowVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * w[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|e| e.0)
    }

    pub fn to_dense(&self, dim: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            *out.get_mut(i).ok_or(BaselineError::FeatureOutOfRange { index: i, dim })? = v;
        }
        Ok(out)
    }
}

/// Stacks vectors as rows of a dense matrix.
pub fn densify(rows: &[BowVector], dim: usize) -> Result<Tensor2D> {
    let mut out = Tensor2D::zeros(rows.len(), dim);
    for (r, v) in rows.iter().enumerate() {
        out.row_mut(r).copy_from_slice(&v.to_dense(dim)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BowScheme {
    Counts,
    TfIdf,
}

impl BowScheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "counts" => Some(Self::Counts),
            "tfidf" => Some(Self::TfIdf),
            _ => None,
        }
    }
}

/// Maps token sequences to [`BowVector`]s over a training-split vocabulary.
#[derive(Debug, Clone)]
pub struct BowFeaturizer {
    vocab: Arc<Vocabulary>,
    scheme: BowScheme,
    idf: Vec<f64>,
}

impl BowFeaturizer {
    /// Document frequencies come from `docs`, which should be the training split.
    pub fn fit<'a, I>(vocab: Arc<Vocabulary>, docs: I, scheme: BowScheme) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let dim = vocab.len().saturating_sub(RESERVED);
        let mut df = vec![0u64; dim];
        let mut n_docs = 0u64;
        for doc in docs {
            n_docs += 1;
            let mut seen: Vec<usize> = doc.iter().filter_map(|t| feature_index(&vocab, t)).collect();
            seen.sort_unstable();
            seen.dedup();
            for i in seen {
                df[i] += 1;
            }
        }
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n_docs as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Self { vocab, scheme, idf }
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn scheme(&self) -> BowScheme {
        self.scheme
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn idf(&self, feature: usize) -> Option<f64> {
        self.idf.get(feature).copied()
    }

    pub fn featurize(&self, tokens: &[String]) -> BowVector {
        let pairs = tokens
            .iter()
            .filter_map(|t| feature_index(&self.vocab, t))
            .map(|i| (i, 1.0))
            .collect();
        let mut v = BowVector::from_pairs(pairs);
        if self.scheme == BowScheme::TfIdf {
            for e in &mut v.entries {
                e.1 *= self.idf[e.0];
            }
        }
        v
    }

    pub fn featurize_all<'a, I>(&self, docs: I) -> Vec<BowVector>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        docs.into_iter().map(|d| self.featurize(d)).collect()
    }
}

fn feature_index(vocab: &Vocabulary, token: &str) -> Option<usize> {
    vocab
        .id(token)
        .filter(|&id| !Vocabulary::is_reserved(id))
        .map(|id| id - RESERVED)
}

pub(crate) fn check_labels(n_features: usize, labels: &[u8]) -> Result<()> {
    if n_features != labels.len() {
        return Err(BaselineError::LabelCount {
            features: n_features,
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    match labels.iter().find(|&&y| y > 1) {
        Some(&y) => Err(BaselineError::BadLabel(y)),
        None => Ok(()),
    }
}

pub(crate) fn check_dim(xs: &[BowVector], dim: usize) -> Result<()> {
    for x in xs {
        if let Some(i) = x.max_index().filter(|&i| i >= dim) {
            return Err(BaselineError::FeatureOutOfRange { index: i, dim });
        }
    }
    Ok(())
}
