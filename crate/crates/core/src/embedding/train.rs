use std::sync::Arc;

use super::{fill_unk, EmbeddingError, EmbeddingMatrix, Provenance, Result};
use crate::corpus::{Vocabulary, RESERVED};
use crate::numerics::{sigmoid, Rng, Tensor2D};

/// Word2vec training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    /// Context radius on each side of the centre word.
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    /// Learning rate reached at the end of training (linear decay).
    pub min_lr: f64,
    /// Frequent-word down-sampling threshold; 0 disables it.
    pub subsample_threshold: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_lr: 1e-4,
            subsample_threshold: 1e-3,
            seed: 1,
        }
    }
}

impl CbowConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EmbeddingError::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if !(self.initial_lr > 0.0) || self.min_lr < 0.0 || self.min_lr > self.initial_lr {
            return bad("need 0 <= min_lr <= initial_lr and initial_lr > 0");
        }
        if self.subsample_threshold < 0.0 {
            return bad("subsample_threshold must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Cbow,
    SkipGram,
}

/// Mean negative-sampling loss per positive example, one entry per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub epoch_losses: Vec<f64>,
}

pub fn train_cbow<I, S>(corpus: I, vocab: Arc<Vocabulary>, config: &CbowConfig) -> Result<EmbeddingMatrix>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[String]>,
{
    train_word2vec(corpus, vocab, config, Objective::Cbow).map(|(m, _)| m)
}

pub fn train_skipgram<I, S>(
    corpus: I,
    vocab: Arc<Vocabulary>,
    config: &CbowConfig,
) -> Result<EmbeddingMatrix>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[String]>,
{
    train_word2vec(corpus, vocab, config, Objective::SkipGram).map(|(m, _)| m)
}

/// Cumulative unigram^0.75 distribution over non-reserved ids.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(vocab: &Vocabulary) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..vocab.len())
            .map(|id| {
                if id >= RESERVED {
                    acc += (vocab.count(id).unwrap_or(0) as f64).powf(0.75);
                }
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let u = rng.uniform() * self.total();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

struct Trainer<'a> {
    config: &'a CbowConfig,
    input: Tensor2D,
    output: Tensor2D,
    table: NegativeTable,
    hidden: Vec<f64>,
    grad: Vec<f64>,
}

impl Trainer<'_> {
    /// One positive target plus sampled negatives against `self.hidden`.
    /// Accumulates the hidden-layer gradient into `self.grad` and returns the loss.
    fn contrast(&mut self, target: usize, lr: f64, rng: &mut Rng) -> f64 {
        let dim = self.config.dim;
        let mut loss = 0.0;
        for n in 0..=self.config.negatives {
            let (word, label) = if n == 0 {
                (target, 1.0)
            } else {
                let w = self.table.sample(rng);
                if w == target {
                    continue;
                }
                (w, 0.0)
            };
            let out = self.output.row_mut(word);
            let f: f64 = out.iter().zip(&self.hidden).map(|(a, b)| a * b).sum();
            let s = sigmoid(f);
            loss -= if label == 1.0 { s.max(1e-300).ln() } else { (1.0 - s).max(1e-300).ln() };
            let g = (label - s) * lr;
            for j in 0..dim {
                self.grad[j] += g * out[j];
                out[j] += g * self.hidden[j];
            }
        }
        loss
    }
}

/// Trains word vectors on `corpus` over `vocab` and reports per-epoch loss.
///
/// Tokens outside the vocabulary are dropped; windows never cross sentence
/// boundaries. The run is single-threaded and a pure function of its inputs.
pub fn train_word2vec<I, S>(
    corpus: I,
    vocab: Arc<Vocabulary>,
    config: &CbowConfig,
    objective: Objective,
) -> Result<(EmbeddingMatrix, TrainStats)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[String]>,
{
    config.validate()?;
    let sentences: Vec<Vec<usize>> = corpus
        .into_iter()
        .map(|s| {
            s.as_ref()
                .iter()
                .filter_map(|t| vocab.id(t).filter(|&id| id >= RESERVED))
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect();
    let total_tokens: usize = sentences.iter().map(Vec::len).sum();
    let need = 2 * config.window + 1;
    if total_tokens < need {
        return Err(EmbeddingError::CorpusTooShort {
            have: total_tokens,
            need,
        });
    }

    let mut rng = Rng::new(config.seed);
    let dim = config.dim;
    let half = 0.5 / dim as f64;
    let mut trainer = Trainer {
        config,
        input: Tensor2D::random_uniform(vocab.len(), dim, -half, half, &mut rng),
        output: Tensor2D::zeros(vocab.len(), dim),
        table: NegativeTable::new(&vocab),
        hidden: vec![0.0; dim],
        grad: vec![0.0; dim],
    };
    if trainer.table.total() == 0.0 {
        return Err(EmbeddingError::InvalidConfig(
            "vocabulary carries no counts for negative sampling".into(),
        ));
    }

    let counted: u64 = (RESERVED..vocab.len()).filter_map(|i| vocab.count(i)).sum();
    let keep_prob: Vec<f64> = (0..vocab.len())
        .map(|id| {
            let t = config.subsample_threshold;
            let c = vocab.count(id).unwrap_or(0) as f64;
            if t <= 0.0 || c == 0.0 {
                return 1.0;
            }
            let f = c / counted as f64;
            ((f / t).sqrt() + 1.0) * t / f
        })
        .collect();

    let planned = (config.epochs * total_tokens).max(1) as f64;
    let mut processed = 0usize;
    let mut stats = TrainStats::default();
    let mut kept = Vec::new();
    for _ in 0..config.epochs {
        let (mut epoch_loss, mut epoch_n) = (0.0, 0usize);
        for sentence in &sentences {
            kept.clear();
            kept.extend(
                sentence
                    .iter()
                    .copied()
                    .filter(|&w| keep_prob[w] >= 1.0 || rng.uniform() < keep_prob[w]),
            );
            for pos in 0..kept.len() {
                let progress = processed as f64 / planned;
                processed += 1;
                let lr = (config.initial_lr - (config.initial_lr - config.min_lr) * progress)
                    .max(config.min_lr);
                let reduced = rng.below(config.window);
                let radius = config.window - reduced;
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius + 1).min(kept.len());
                let center = kept[pos];
                let context = (lo..hi).filter(|&j| j != pos).map(|j| kept[j]);
                match objective {
                    Objective::Cbow => {
                        let ctx: Vec<usize> = context.collect();
                        if ctx.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / ctx.len() as f64;
                        trainer.hidden.iter_mut().for_each(|h| *h = 0.0);
                        for &c in &ctx {
                            for (h, v) in trainer.hidden.iter_mut().zip(trainer.input.row(c)) {
                                *h += v * inv;
                            }
                        }
                        trainer.grad.iter_mut().for_each(|g| *g = 0.0);
                        epoch_loss += trainer.contrast(center, lr, &mut rng);
                        epoch_n += 1;
                        // the mean spreads the hidden gradient evenly over the context
                        for &c in &ctx {
                            for (v, g) in trainer.input.row_mut(c).iter_mut().zip(&trainer.grad) {
                                *v += g * inv;
                            }
                        }
                    }
                    Objective::SkipGram => {
                        for c in context {
                            trainer.hidden.copy_from_slice(trainer.input.row(center));
                            trainer.grad.iter_mut().for_each(|g| *g = 0.0);
                            epoch_loss += trainer.contrast(c, lr, &mut rng);
                            epoch_n += 1;
                            for (v, g) in trainer.input.row_mut(center).iter_mut().zip(&trainer.grad) {
                                *v += g;
                            }
                        }
                    }
                }
            }
        }
        stats
            .epoch_losses
            .push(if epoch_n == 0 { 0.0 } else { epoch_loss / epoch_n as f64 });
    }

    let mut vectors = trainer.input;
    fill_unk(&mut vectors, &mut rng);
    let emb = EmbeddingMatrix::new(vocab, vectors, Provenance::DomainPretrained, true)?;
    Ok((emb, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PAD_ID;
    use crate::embedding::cosine;

    fn corpus_ab(n: usize) -> Vec<Vec<String>> {
        (0..n)
            .map(|_| "a b a b a b a b".split(' ').map(String::from).collect())
            .collect()
    }

    fn small_config(seed: u64) -> CbowConfig {
        CbowConfig {
            dim: 10,
            window: 1,
            negatives: 2,
            epochs: 5,
            subsample_threshold: 0.0,
            seed,
            ..CbowConfig::default()
        }
    }

    #[test]
    fn empty_and_short_corpus_error() {
        let vocab = Arc::new(Vocabulary::from_ordered(vec![("a".into(), 3)]));
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(
            train_skipgram(empty, vocab.clone(), &small_config(1)),
            Err(EmbeddingError::CorpusTooShort { have: 0, .. })
        ));
        let short = vec![vec!["a".to_string(), "a".to_string()]];
        let cfg = CbowConfig { window: 2, ..small_config(1) };
        assert!(matches!(
            train_cbow(short, vocab, &cfg),
            Err(EmbeddingError::CorpusTooShort { have: 2, need: 5 })
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let corpus = corpus_ab(3);
        let vocab = Arc::new(Vocabulary::build(&corpus, 1).unwrap());
        for cfg in [
            CbowConfig { dim: 0, ..small_config(1) },
            CbowConfig { window: 0, ..small_config(1) },
            CbowConfig { negatives: 0, ..small_config(1) },
        ] {
            assert!(train_cbow(&corpus, vocab.clone(), &cfg).is_err());
        }
    }

    #[test]
    fn deterministic_and_pad_zero() {
        let corpus = corpus_ab(20);
        let vocab = Arc::new(Vocabulary::build(&corpus, 1).unwrap());
        let a = train_cbow(&corpus, vocab.clone(), &small_config(9)).unwrap();
        let b = train_cbow(&corpus, vocab, &small_config(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.vectors().row(PAD_ID).iter().all(|&v| v == 0.0));
        assert!(a.vectors().is_finite());
    }

    #[test]
    fn window_one_pair_are_mutual_neighbours() {
        let corpus = corpus_ab(50);
        let vocab = Arc::new(Vocabulary::build(&corpus, 1).unwrap());
        let emb = train_skipgram(&corpus, vocab, &small_config(3)).unwrap();
        let nn_a = crate::embedding::nearest_neighbors(&emb, "a", 1).unwrap();
        let nn_b = crate::embedding::nearest_neighbors(&emb, "b", 1).unwrap();
        assert_eq!(nn_a[0].0, "b");
        assert_eq!(nn_b[0].0, "a");
    }

    #[test]
    fn cosine_of_pair_grows_with_epochs() {
        // One long "a b a b ..." sentence under the default window: mean over
        // seeds of cos(a, b) rises with every extra epoch.
        let sentence: Vec<String> = (0..48).map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string()).collect();
        let corpus = vec![sentence];
        let vocab = Arc::new(Vocabulary::build(&corpus, 1).unwrap());
        let mut means = Vec::new();
        for epochs in 1..=5 {
            let mut total = 0.0;
            for seed in 0..5 {
                let cfg = CbowConfig {
                    dim: 10,
                    epochs,
                    subsample_threshold: 0.0,
                    seed,
                    ..CbowConfig::default()
                };
                let emb = train_cbow(&corpus, vocab.clone(), &cfg).unwrap();
                total += cosine(emb.vector("a").unwrap(), emb.vector("b").unwrap()).unwrap();
            }
            means.push(total / 5.0);
        }
        for w in means.windows(2) {
            assert!(w[1] > w[0], "{means:?}");
        }
    }
}
