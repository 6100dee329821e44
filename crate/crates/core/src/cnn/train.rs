use std::fmt::Write as _;

use super::{batch_bce, CnnError, CnnModel, Mode, ParamId, Result};
use crate::corpus::EncodedTweet;
use crate::numerics::{AdamHyper, AdamState, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    /// Accuracy of the dropout-perturbed predictions made during the epoch.
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Zero-based epoch whose parameters were kept, if validation ran.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_accuracy,validation_accuracy\n");
        for (i, e) in self.epochs.iter().enumerate() {
            let va = e.validation_accuracy.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", i + 1, e.train_loss, e.train_accuracy, va);
        }
        out
    }
}

fn accuracy(model: &CnnModel, data: &[(EncodedTweet, u8)]) -> Result<f64> {
    let tweets: Vec<EncodedTweet> = data.iter().map(|(t, _)| t.clone()).collect();
    let labels = model.predict_labels(&tweets)?;
    let hits = labels.iter().zip(data).filter(|(p, (_, y))| *p == y).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Mini-batch Adam on shuffled batches. With a non-empty `valid` set the
/// parameters from the epoch with the best validation accuracy are returned
/// and training stops after `patience` epochs without improvement.
pub fn train(
    mut model: CnnModel,
    train: &[(EncodedTweet, u8)],
    valid: &[(EncodedTweet, u8)],
) -> Result<(CnnModel, TrainHistory)> {
    if train.is_empty() {
        return Err(CnnError::EmptyTrainingSet);
    }
    if let Some((_, y)) = train.iter().chain(valid).find(|(_, y)| *y > 1) {
        return Err(CnnError::BadLabel(*y));
    }
    let cfg = model.config().clone();
    let hyper = AdamHyper::with_lr(cfg.learning_rate);
    let mut optimizers: Vec<(ParamId, AdamState)> = model
        .param_ids()
        .into_iter()
        .map(|id| {
            let p = model.param(id).expect("listed parameter exists");
            Ok((id, AdamState::for_params(p, hyper)?))
        })
        .collect::<Result<_>>()?;
    let mut rng = Rng::derive(cfg.seed, "cnn-train");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, CnnModel)> = None;
    let mut stale_epochs = 0;

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let tweets: Vec<EncodedTweet> = chunk.iter().map(|&i| train[i].0.clone()).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train[i].1).collect();
            let (probs, cache) = model.forward(&tweets, Mode::Train, &mut rng)?;
            let cache = cache.expect("train mode yields a cache");
            loss_sum += batch_bce(&probs, &labels)? * chunk.len() as f64;
            hits += probs
                .iter()
                .zip(&labels)
                .filter(|(p, y)| model.classify(**p) == **y)
                .count();
            let grads = model.backward(&cache, &labels)?;
            for (id, state) in &mut optimizers {
                let g = grads.get(*id).expect("gradient for every trainable group");
                let p = model.param_mut(*id).expect("listed parameter exists");
                state.step(p, g)?;
            }
        }
        let validation_accuracy = if valid.is_empty() {
            None
        } else {
            Some(accuracy(&model, valid)?)
        };
        history.epochs.push(EpochRecord {
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: hits as f64 / train.len() as f64,
            validation_accuracy,
        });
        if let Some(va) = validation_accuracy {
            if best.as_ref().is_none_or(|(b, _)| va > *b) {
                best = Some((va, model.clone()));
                history.best_epoch = Some(epoch);
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if cfg.patience > 0 && stale_epochs >= cfg.patience {
                    break;
                }
            }
        }
    }
    let model = match best {
        Some((_, m)) => m,
        None => model,
    };
    Ok((model, history))
}
