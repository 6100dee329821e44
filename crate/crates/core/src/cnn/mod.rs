//! Convolutional tweet classifier: parallel filter banks with max-over-time
//! pooling, a dense ReLU layer and a sigmoid output.

mod checkpoint;
mod config;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use config::{parse_filters, CnnConfig, FilterSpec};
pub use model::{CnnGradients, CnnModel, FilterBank, ForwardCache, Mode, ParamId};
pub use train::{train, EpochRecord, TrainHistory};

use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::numerics::{NumericsError, Tensor2D};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} is outside the model vocabulary of {vocab} entries")]
    VocabMismatch { id: usize, vocab: usize },
    #[error("tweet has {len} positions but the widest filter needs {height}")]
    TooShort { len: usize, height: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("{probs} outputs but {labels} labels")]
    LabelCount { probs: usize, labels: usize },
    #[error("label must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("probability {0} outside (0, 1)")]
    BadProbability(f64),
    #[error("forward cache is stale: parameters changed since it was produced")]
    StaleCache,
    #[error("forward cache was produced in eval mode")]
    EvalCache,
    #[error("vocabulary hash mismatch: checkpoint has {expected}, got {found}")]
    VocabHashMismatch { expected: String, found: String },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

pub type Result<T> = std::result::Result<T, CnnError>;

/// Guard keeping `ln p` and `ln(1-p)` finite when a sigmoid saturates.
pub const PROB_CLAMP: f64 = 1e-15;

/// Max over positions of ReLU(<filter, tweet[k..k+h]> + bias).
pub fn conv_maxpool(tweet: &Tensor2D, filter: &Tensor2D, bias: f64) -> Result<f64> {
    if filter.cols() != tweet.cols() {
        return Err(NumericsError::ShapeMismatch {
            expected: (filter.rows(), tweet.cols()),
            got: filter.shape(),
        }
        .into());
    }
    let (m, h) = (tweet.rows(), filter.rows());
    if h == 0 || m < h {
        return Err(CnnError::TooShort { len: m, height: h });
    }
    let (best, _) = model::max_window(tweet.as_slice(), filter.as_slice(), bias, m, h, tweet.cols());
    Ok(best.max(0.0))
}

/// Binary cross-entropy for one prediction.
pub fn bce_loss(p: f64, y: u8) -> Result<f64> {
    if y > 1 {
        return Err(CnnError::BadLabel(y));
    }
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(CnnError::BadProbability(p));
    }
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    Ok(if y == 1 { -p.ln() } else { -(1.0 - p).ln() })
}

/// Mean binary cross-entropy over a batch.
pub fn batch_bce(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(CnnError::LabelCount {
            probs: probs.len(),
            labels: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(CnnError::EmptyBatch);
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        total += bce_loss(p, y)?;
    }
    Ok(total / probs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_maxpool_cases() {
        let t = Tensor2D::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = Tensor2D::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(conv_maxpool(&t, &f, 0.0).unwrap(), 2.0);
        assert_eq!(conv_maxpool(&t, &Tensor2D::zeros(2, 2), 0.0).unwrap(), 0.0);
        assert_eq!(conv_maxpool(&t, &f.scale(-1.0), 0.0).unwrap(), 0.0);
        assert!(matches!(
            conv_maxpool(&t, &Tensor2D::zeros(4, 2), 0.0),
            Err(CnnError::TooShort { len: 3, height: 4 })
        ));
    }

    #[test]
    fn bce_values() {
        assert!((bce_loss(0.5, 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((bce_loss(0.5, 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((bce_loss(0.9, 0).unwrap() - std::f64::consts::LN_10).abs() < 1e-12);
        assert!(bce_loss(1.0 - 1e-12, 1).unwrap() < 1e-11);
        assert!(bce_loss(1.0, 0).unwrap().is_finite());
        assert!(bce_loss(f64::NAN, 0).is_err());
        assert!(bce_loss(1.2, 0).is_err());
        assert!(bce_loss(0.5, 2).is_err());
        assert!(batch_bce(&[0.5], &[]).is_err());
    }
}
