//! Word vectors: CBOW and skip-gram training with negative sampling,
//! similarity queries, and vector file I/O.

mod io;
mod train;

pub use io::{format_vectors, load_binary, load_vectors, parse_vectors, save_binary, save_vectors};
pub use train::{train_cbow, train_skipgram, train_word2vec, CbowConfig, Objective, TrainStats};

use std::sync::Arc;

use thiserror::Error;

use crate::corpus::{Vocabulary, PAD_ID, RESERVED, UNK_ID};
use crate::numerics::{Rng, Tensor2D};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("corpus has {have} usable tokens, needs at least {need}")]
    CorpusTooShort { have: usize, need: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("vector matrix has {rows} rows but the vocabulary has {vocab} entries")]
    RowMismatch { rows: usize, vocab: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

/// Where a matrix's vectors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    DomainPretrained,
    GeneralPretrained,
    RandomInit,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::DomainPretrained => "domain-pretrained",
            Provenance::GeneralPretrained => "general-pretrained",
            Provenance::RandomInit => "random-init",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "domain-pretrained" => Some(Self::DomainPretrained),
            "general-pretrained" => Some(Self::GeneralPretrained),
            "random-init" => Some(Self::RandomInit),
            _ => None,
        }
    }

    fn code(self) -> u8 {
        match self {
            Provenance::DomainPretrained => 0,
            Provenance::GeneralPretrained => 1,
            Provenance::RandomInit => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        [Self::DomainPretrained, Self::GeneralPretrained, Self::RandomInit]
            .into_iter()
            .find(|p| p.code() == c)
    }
}

/// Range of the uniform draw used for `<unk>` and tokens missing from a
/// pretrained source.
pub const UNK_INIT_RANGE: f64 = 0.25;

/// Per-token dense vectors over a vocabulary. The `<pad>` row is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Arc<Vocabulary>,
    vectors: Tensor2D,
    provenance: Provenance,
    trainable: bool,
}

impl EmbeddingMatrix {
    pub fn new(
        vocab: Arc<Vocabulary>,
        mut vectors: Tensor2D,
        provenance: Provenance,
        trainable: bool,
    ) -> Result<Self> {
        if vectors.rows() != vocab.len() {
            return Err(EmbeddingError::RowMismatch {
                rows: vectors.rows(),
                vocab: vocab.len(),
            });
        }
        if vectors.cols() == 0 {
            return Err(EmbeddingError::InvalidConfig("dim must be >= 1".into()));
        }
        vectors.row_mut(PAD_ID).fill(0.0);
        Ok(Self {
            vocab,
            vectors,
            provenance,
            trainable,
        })
    }

    /// Uniform(-0.5/dim, 0.5/dim) vectors; `<unk>` uses the wider OOV range.
    pub fn random_init(vocab: Arc<Vocabulary>, dim: usize, rng: &mut Rng) -> Result<Self> {
        if dim == 0 {
            return Err(EmbeddingError::InvalidConfig("dim must be >= 1".into()));
        }
        let half = 0.5 / dim as f64;
        let mut vectors = Tensor2D::random_uniform(vocab.len(), dim, -half, half, rng);
        fill_unk(&mut vectors, rng);
        Self::new(vocab, vectors, Provenance::RandomInit, true)
    }

    /// Re-indexes these vectors onto `vocab`. Tokens absent here get a fresh
    /// uniform(-0.25, 0.25) vector, as `<unk>` does.
    pub fn project(&self, vocab: Arc<Vocabulary>, rng: &mut Rng) -> Result<Self> {
        let dim = self.dim();
        let mut vectors = Tensor2D::zeros(vocab.len(), dim);
        for (id, (tok, _)) in vocab.entries().iter().enumerate() {
            if id == PAD_ID {
                continue;
            }
            let row = vectors.row_mut(id);
            match self.vocab.id(tok).filter(|&i| i != UNK_ID) {
                Some(src) => row.copy_from_slice(self.vectors.row(src)),
                None => row
                    .iter_mut()
                    .for_each(|v| *v = rng.uniform_range(-UNK_INIT_RANGE, UNK_INIT_RANGE)),
            }
        }
        Self::new(vocab, vectors, self.provenance, self.trainable)
    }

    pub fn with_trainable(mut self, trainable: bool) -> Self {
        self.trainable = trainable;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn vectors(&self) -> &Tensor2D {
        &self.vectors
    }

    /// Mutable access for classifier fine-tuning. Callers must keep the
    /// `<pad>` row at zero.
    pub fn vectors_mut(&mut self) -> &mut Tensor2D {
        &mut self.vectors
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.id(token).map(|id| self.vectors.row(id))
    }

    /// Top-`k` ids by cosine similarity to `query`, skipping reserved
    /// entries, zero rows and ids rejected by `skip`. Ties go to the lower id.
    pub fn nearest_to_vector(
        &self,
        query: &[f64],
        k: usize,
        skip: impl Fn(usize) -> bool,
    ) -> Result<Vec<(usize, f64)>> {
        if query.len() != self.dim() {
            return Err(EmbeddingError::DimMismatch(query.len(), self.dim()));
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(EmbeddingError::ZeroVector);
        }
        let mut scored: Vec<(usize, f64)> = (RESERVED..self.vocab.len())
            .filter(|&id| !skip(id))
            .filter_map(|id| {
                let row = self.vectors.row(id);
                let rn = norm(row);
                (rn > 0.0).then(|| (id, dot(query, row) / (qn * rn)))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }
}

pub(crate) fn fill_unk(vectors: &mut Tensor2D, rng: &mut Rng) {
    vectors
        .row_mut(UNK_ID)
        .iter_mut()
        .for_each(|v| *v = rng.uniform_range(-UNK_INIT_RANGE, UNK_INIT_RANGE));
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Top-`k` neighbours of `token` by cosine, excluding the token itself,
/// `<pad>` and `<unk>`.
pub fn nearest_neighbors(emb: &EmbeddingMatrix, token: &str, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(EmbeddingError::InvalidConfig("k must be >= 1".into()));
    }
    let id = emb
        .vocab
        .id(token)
        .filter(|&i| i >= RESERVED)
        .ok_or_else(|| EmbeddingError::UnknownToken(token.to_string()))?;
    let hits = emb.nearest_to_vector(emb.vectors.row(id), k, |j| j == id)?;
    Ok(hits
        .into_iter()
        .map(|(j, c)| (emb.vocab.token(j).unwrap_or_default().to_string(), c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::from_ordered((0..n).map(|i| (format!("w{i}"), 1)).collect()))
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbeddingError::ZeroVector)));
    }

    #[test]
    fn identical_vector_ranks_first() {
        let v = vocab(4);
        let mut rng = Rng::new(1);
        let mut emb = EmbeddingMatrix::random_init(v, 3, &mut rng).unwrap();
        let a = emb.vectors().row(2).to_vec();
        emb.vectors_mut().row_mut(4).copy_from_slice(&a);
        let nn = nearest_neighbors(&emb, "w0", 2).unwrap();
        assert_eq!(nn[0].0, "w2");
        assert!((nn[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_is_clamped_and_oov_errors() {
        let mut rng = Rng::new(2);
        let emb = EmbeddingMatrix::random_init(vocab(5), 4, &mut rng).unwrap();
        assert_eq!(nearest_neighbors(&emb, "w1", 100).unwrap().len(), 4);
        assert!(matches!(
            nearest_neighbors(&emb, "nope", 1),
            Err(EmbeddingError::UnknownToken(_))
        ));
        assert!(nearest_neighbors(&emb, crate::corpus::UNK, 1).is_err());
    }

    #[test]
    fn random_init_ranges_and_pad() {
        let mut rng = Rng::new(3);
        let emb = EmbeddingMatrix::random_init(vocab(10), 8, &mut rng).unwrap();
        assert!(emb.vectors().row(PAD_ID).iter().all(|&v| v == 0.0));
        for id in RESERVED..emb.vocab().len() {
            assert!(emb.vectors().row(id).iter().all(|v| v.abs() <= 0.5 / 8.0));
        }
        assert!(emb.vectors().row(UNK_ID).iter().all(|v| v.abs() <= 0.25));
        assert_eq!(emb.provenance(), Provenance::RandomInit);
        assert!(emb.trainable());
    }

    #[test]
    fn projection_copies_known_and_fills_missing() {
        let mut rng = Rng::new(4);
        let src = EmbeddingMatrix::random_init(vocab(3), 5, &mut rng)
            .unwrap()
            .with_provenance(Provenance::GeneralPretrained);
        let target = Arc::new(Vocabulary::from_ordered(vec![
            ("w2".into(), 1),
            ("fresh".into(), 1),
        ]));
        let p = src.project(target.clone(), &mut rng).unwrap();
        assert_eq!(p.vectors().shape(), (4, 5));
        assert_eq!(p.vector("w2").unwrap(), src.vector("w2").unwrap());
        assert!(p.vector("fresh").unwrap().iter().all(|v| v.abs() <= 0.25));
        assert_eq!(p.provenance(), Provenance::GeneralPretrained);
    }

    #[test]
    fn row_mismatch_rejected() {
        let v = vocab(3);
        let err = EmbeddingMatrix::new(v, Tensor2D::zeros(2, 3), Provenance::RandomInit, true);
        assert!(matches!(err, Err(EmbeddingError::RowMismatch { .. })));
    }
}
