use rayon::prelude::*;

use super::{batch_bce, CnnConfig, CnnError, Result, PROB_CLAMP};
use crate::corpus::{EncodedTweet, PAD_ID};
use crate::embedding::EmbeddingMatrix;
use crate::numerics::{dropout_mask, sigmoid, Rng, Tensor2D};

/// Filters of one height. Row `f` of `weights` is filter `f` flattened
/// row-major as `height x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub height: usize,
    pub weights: Tensor2D,
    pub bias: Tensor2D,
    pub dropout: f64,
}

impl FilterBank {
    pub fn count(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    Embedding,
    FilterWeights(usize),
    FilterBias(usize),
    DenseWeights,
    DenseBias,
    OutputWeights,
    OutputBias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct CnnModel {
    config: CnnConfig,
    embedding: EmbeddingMatrix,
    banks: Vec<FilterBank>,
    dense_w: Tensor2D,
    dense_b: Tensor2D,
    out_w: Tensor2D,
    out_b: Tensor2D,
    generation: u64,
}

/// Parameter equality; the cache generation counter is ignored.
impl PartialEq for CnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.embedding == other.embedding
            && self.banks == other.banks
            && self.dense_w == other.dense_w
            && self.dense_b == other.dense_b
            && self.out_w == other.out_w
            && self.out_b == other.out_b
    }
}

#[derive(Debug, Clone)]
struct Masks {
    input: Option<Vec<f64>>,
    pooled: Option<Vec<f64>>,
    dense: Option<Vec<f64>>,
}

impl Masks {
    fn none() -> Self {
        Self {
            input: None,
            pooled: None,
            dense: None,
        }
    }
}

#[derive(Debug, Clone)]
struct ExampleCache {
    ids: Vec<usize>,
    x: Vec<f64>,
    masks: Masks,
    argmax: Vec<Option<usize>>,
    pooled: Vec<f64>,
    dense_pre: Vec<f64>,
    dense_out: Vec<f64>,
    prob: f64,
}

/// Activations and dropout masks from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    examples: Vec<ExampleCache>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.prob).collect()
    }

    /// Window start chosen by each filter for example `i`; `None` when the
    /// pooled value was clipped to zero.
    pub fn argmax(&self, i: usize) -> &[Option<usize>] {
        &self.examples[i].argmax
    }
}

/// Gradients of mean batch BCE. `embedding` is `None` for a frozen layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnGradients {
    pub embedding: Option<Tensor2D>,
    pub filter_weights: Vec<Tensor2D>,
    pub filter_bias: Vec<Tensor2D>,
    pub dense_weights: Tensor2D,
    pub dense_bias: Tensor2D,
    pub output_weights: Tensor2D,
    pub output_bias: Tensor2D,
}

impl CnnGradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor2D> {
        match id {
            ParamId::Embedding => self.embedding.as_ref(),
            ParamId::FilterWeights(b) => self.filter_weights.get(b),
            ParamId::FilterBias(b) => self.filter_bias.get(b),
            ParamId::DenseWeights => Some(&self.dense_weights),
            ParamId::DenseBias => Some(&self.dense_bias),
            ParamId::OutputWeights => Some(&self.output_weights),
            ParamId::OutputBias => Some(&self.output_bias),
        }
    }
}

pub(crate) fn max_window(x: &[f64], w: &[f64], bias: f64, m: usize, h: usize, n: usize) -> (f64, usize) {
    let span = h * n;
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for k in 0..=(m - h) {
        let window = &x[k * n..k * n + span];
        let z = bias + window.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        if z > best {
            best = z;
            arg = k;
        }
    }
    (best, arg)
}

fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut Rng) -> Tensor2D {
    Tensor2D::random_uniform(rows, cols, -limit, limit, rng)
}

impl CnnModel {
    pub const FILTER_INIT: f64 = 0.05;

    /// Fresh model around `embedding`. Banks are stored by ascending height.
    pub fn new(mut config: CnnConfig, embedding: EmbeddingMatrix, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        config.filters.sort_by_key(|f| f.height);
        let n = embedding.dim();
        let banks = config
            .filters
            .iter()
            .map(|f| FilterBank {
                height: f.height,
                weights: uniform(f.count, f.height * n, Self::FILTER_INIT, rng),
                bias: Tensor2D::zeros(1, f.count),
                dropout: f.dropout,
            })
            .collect();
        let total = config.total_filters();
        let d = config.dense_units;
        let dense_w = uniform(total, d, (6.0 / total as f64).sqrt(), rng);
        let out_w = uniform(d, 1, (3.0 / d as f64).sqrt(), rng);
        Ok(Self {
            config,
            embedding,
            banks,
            dense_w,
            dense_b: Tensor2D::zeros(1, d),
            out_w,
            out_b: Tensor2D::zeros(1, 1),
            generation: 0,
        })
    }

    /// Assembles a model from explicit parameters, checking every shape.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        mut config: CnnConfig,
        embedding: EmbeddingMatrix,
        banks: Vec<FilterBank>,
        dense_w: Tensor2D,
        dense_b: Tensor2D,
        out_w: Tensor2D,
        out_b: Tensor2D,
    ) -> Result<Self> {
        config.validate()?;
        config.filters.sort_by_key(|f| f.height);
        let n = embedding.dim();
        let bad = |m: String| Err(CnnError::InvalidConfig(m));
        if banks.len() != config.filters.len() {
            return bad(format!("{} banks for {} filter specs", banks.len(), config.filters.len()));
        }
        for (b, spec) in banks.iter().zip(&config.filters) {
            if b.height != spec.height
                || b.weights.shape() != (spec.count, spec.height * n)
                || b.bias.shape() != (1, spec.count)
            {
                return bad(format!("filter bank h={} has the wrong shape", spec.height));
            }
        }
        let (f, d) = (config.total_filters(), config.dense_units);
        if dense_w.shape() != (f, d) || dense_b.shape() != (1, d) || out_w.shape() != (d, 1) || out_b.shape() != (1, 1) {
            return bad("dense or output layer has the wrong shape".into());
        }
        Ok(Self {
            config,
            embedding,
            banks,
            dense_w,
            dense_b,
            out_w,
            out_b,
            generation: 0,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        &self.embedding
    }

    pub fn banks(&self) -> &[FilterBank] {
        &self.banks
    }

    pub fn dense(&self) -> (&Tensor2D, &Tensor2D) {
        (&self.dense_w, &self.dense_b)
    }

    pub fn output(&self) -> (&Tensor2D, &Tensor2D) {
        (&self.out_w, &self.out_b)
    }

    pub fn total_filters(&self) -> usize {
        self.banks.iter().map(FilterBank::count).sum()
    }

    /// Trainable parameter groups in checkpoint order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        if self.embedding.trainable() {
            ids.push(ParamId::Embedding);
        }
        for b in 0..self.banks.len() {
            ids.push(ParamId::FilterWeights(b));
            ids.push(ParamId::FilterBias(b));
        }
        ids.extend([ParamId::DenseWeights, ParamId::DenseBias, ParamId::OutputWeights, ParamId::OutputBias]);
        ids
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor2D> {
        match id {
            ParamId::Embedding => Some(self.embedding.vectors()),
            ParamId::FilterWeights(b) => self.banks.get(b).map(|x| &x.weights),
            ParamId::FilterBias(b) => self.banks.get(b).map(|x| &x.bias),
            ParamId::DenseWeights => Some(&self.dense_w),
            ParamId::DenseBias => Some(&self.dense_b),
            ParamId::OutputWeights => Some(&self.out_w),
            ParamId::OutputBias => Some(&self.out_b),
        }
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn param_mut(&mut self, id: ParamId) -> Option<&mut Tensor2D> {
        self.generation += 1;
        match id {
            ParamId::Embedding => Some(self.embedding.vectors_mut()),
            ParamId::FilterWeights(b) => self.banks.get_mut(b).map(|x| &mut x.weights),
            ParamId::FilterBias(b) => self.banks.get_mut(b).map(|x| &mut x.bias),
            ParamId::DenseWeights => Some(&mut self.dense_w),
            ParamId::DenseBias => Some(&mut self.dense_b),
            ParamId::OutputWeights => Some(&mut self.out_w),
            ParamId::OutputBias => Some(&mut self.out_b),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.embedding.vectors().is_finite()
            && self.banks.iter().all(|b| b.weights.is_finite() && b.bias.is_finite())
            && [&self.dense_w, &self.dense_b, &self.out_w, &self.out_b]
                .iter()
                .all(|t| t.is_finite())
    }

    fn check_tweet(&self, tweet: &EncodedTweet) -> Result<()> {
        let height = self.config.max_height();
        if tweet.ids.len() < height {
            return Err(CnnError::TooShort {
                len: tweet.ids.len(),
                height,
            });
        }
        let vocab = self.embedding.vocab().len();
        if let Some(&id) = tweet.ids.iter().find(|&&id| id >= vocab) {
            return Err(CnnError::VocabMismatch { id, vocab });
        }
        Ok(())
    }

    fn draw_masks(&self, m: usize, rng: &mut Rng) -> Result<Masks> {
        let n = self.embedding.dim();
        let c = &self.config;
        let input = if c.input_dropout == 0.0 {
            None
        } else if c.word_dropout {
            let rows = dropout_mask(m, 1, c.input_dropout, rng)?;
            Some(rows.as_slice().iter().flat_map(|&v| std::iter::repeat_n(v, n)).collect())
        } else {
            Some(dropout_mask(m, n, c.input_dropout, rng)?.into_vec())
        };
        let pooled = if self.banks.iter().all(|b| b.dropout == 0.0) {
            None
        } else {
            let mut v = Vec::with_capacity(self.total_filters());
            for b in &self.banks {
                v.extend(dropout_mask(1, b.count(), b.dropout, rng)?.into_vec());
            }
            Some(v)
        };
        let dense = if c.dense_dropout == 0.0 {
            None
        } else {
            Some(dropout_mask(1, c.dense_units, c.dense_dropout, rng)?.into_vec())
        };
        Ok(Masks { input, pooled, dense })
    }

    fn forward_one(&self, ids: &[usize], masks: Masks) -> ExampleCache {
        let n = self.embedding.dim();
        let m = ids.len();
        let vectors = self.embedding.vectors();
        let mut x = Vec::with_capacity(m * n);
        for &id in ids {
            x.extend_from_slice(vectors.row(id));
        }
        if let Some(mask) = &masks.input {
            x.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
        }
        let total = self.total_filters();
        let mut argmax = Vec::with_capacity(total);
        let mut pooled = Vec::with_capacity(total);
        for bank in &self.banks {
            for f in 0..bank.count() {
                let (best, k) = max_window(&x, bank.weights.row(f), bank.bias.get(0, f), m, bank.height, n);
                if best > 0.0 {
                    argmax.push(Some(k));
                    pooled.push(best);
                } else {
                    argmax.push(None);
                    pooled.push(0.0);
                }
            }
        }
        if let Some(mask) = &masks.pooled {
            pooled.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
        }
        let d = self.config.dense_units;
        let mut dense_pre = self.dense_b.as_slice().to_vec();
        for (i, &p) in pooled.iter().enumerate() {
            if p != 0.0 {
                for (acc, w) in dense_pre.iter_mut().zip(self.dense_w.row(i)) {
                    *acc += p * w;
                }
            }
        }
        let mut dense_out: Vec<f64> = dense_pre.iter().map(|&v| v.max(0.0)).collect();
        if let Some(mask) = &masks.dense {
            dense_out.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
        }
        let z = self.out_b.get(0, 0) + (0..d).map(|j| dense_out[j] * self.out_w.get(j, 0)).sum::<f64>();
        ExampleCache {
            ids: ids.to_vec(),
            x,
            masks,
            argmax,
            pooled,
            dense_pre,
            dense_out,
            prob: sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP),
        }
    }

    /// Probabilities for a batch. Train mode samples dropout masks from `rng`
    /// and returns the cache needed by [`CnnModel::backward`].
    pub fn forward(&self, batch: &[EncodedTweet], mode: Mode, rng: &mut Rng) -> Result<(Vec<f64>, Option<ForwardCache>)> {
        if batch.is_empty() {
            return Err(CnnError::EmptyBatch);
        }
        for t in batch {
            self.check_tweet(t)?;
        }
        let masks = match mode {
            Mode::Eval => vec![Masks::none(); batch.len()],
            Mode::Train => batch
                .iter()
                .map(|t| self.draw_masks(t.ids.len(), rng))
                .collect::<Result<Vec<_>>>()?,
        };
        let examples: Vec<ExampleCache> = batch
            .par_iter()
            .zip(masks)
            .map(|(t, mk)| self.forward_one(&t.ids, mk))
            .collect();
        let probs = examples.iter().map(|e| e.prob).collect();
        let cache = match mode {
            Mode::Eval => None,
            Mode::Train => Some(ForwardCache {
                generation: self.generation,
                examples,
            }),
        };
        Ok((probs, cache))
    }

    /// Eval-mode probabilities.
    pub fn predict_proba(&self, batch: &[EncodedTweet]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let mut unused = Rng::new(0);
        Ok(self.forward(batch, Mode::Eval, &mut unused)?.0)
    }

    pub fn classify(&self, prob: f64) -> u8 {
        u8::from(prob >= self.config.threshold)
    }

    pub fn predict(&self, tweet: &EncodedTweet) -> Result<(f64, u8)> {
        let p = self.predict_proba(std::slice::from_ref(tweet))?[0];
        Ok((p, self.classify(p)))
    }

    pub fn predict_labels(&self, batch: &[EncodedTweet]) -> Result<Vec<u8>> {
        Ok(self.predict_proba(batch)?.into_iter().map(|p| self.classify(p)).collect())
    }

    /// Eval-mode concatenated pooled features of one tweet.
    pub fn pooled_features(&self, tweet: &EncodedTweet) -> Result<Vec<f64>> {
        self.check_tweet(tweet)?;
        Ok(self.forward_one(&tweet.ids, Masks::none()).pooled)
    }

    /// Eval-mode mean BCE.
    pub fn loss(&self, batch: &[EncodedTweet], labels: &[u8]) -> Result<f64> {
        batch_bce(&self.predict_proba(batch)?, labels)
    }

    /// Exact gradients of mean BCE for the batch recorded in `cache`,
    /// reusing its dropout masks.
    pub fn backward(&self, cache: &ForwardCache, labels: &[u8]) -> Result<CnnGradients> {
        if cache.generation != self.generation {
            return Err(CnnError::StaleCache);
        }
        if labels.len() != cache.examples.len() {
            return Err(CnnError::LabelCount {
                probs: cache.examples.len(),
                labels: labels.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y > 1) {
            return Err(CnnError::BadLabel(y));
        }
        let batch = cache.examples.len() as f64;
        let d = self.config.dense_units;
        let total = self.total_filters();

        struct Local {
            dz: f64,
            d_pre: Vec<f64>,
            d_conv: Vec<f64>,
        }
        let locals: Vec<Local> = cache
            .examples
            .par_iter()
            .zip(labels)
            .map(|(e, &y)| {
                let dz = (e.prob - f64::from(y)) / batch;
                let mut d_pre: Vec<f64> = (0..d)
                    .map(|j| if e.dense_pre[j] > 0.0 { self.out_w.get(j, 0) * dz } else { 0.0 })
                    .collect();
                if let Some(mask) = &e.masks.dense {
                    d_pre.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                }
                let mut d_conv: Vec<f64> = (0..total)
                    .map(|i| match e.argmax[i] {
                        Some(_) => self.dense_w.row(i).iter().zip(&d_pre).map(|(w, g)| w * g).sum(),
                        None => 0.0,
                    })
                    .collect();
                if let Some(mask) = &e.masks.pooled {
                    d_conv.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                }
                Local { dz, d_pre, d_conv }
            })
            .collect();

        let mut output_weights = Tensor2D::zeros(d, 1);
        let mut output_bias = Tensor2D::zeros(1, 1);
        let mut dense_bias = Tensor2D::zeros(1, d);
        for (e, l) in cache.examples.iter().zip(&locals) {
            for j in 0..d {
                let g = output_weights.get(j, 0) + e.dense_out[j] * l.dz;
                output_weights.set(j, 0, g);
            }
            output_bias.set(0, 0, output_bias.get(0, 0) + l.dz);
            for (acc, g) in dense_bias.as_mut_slice().iter_mut().zip(&l.d_pre) {
                *acc += g;
            }
        }

        let mut dense_weights = Tensor2D::zeros(total, d);
        dense_weights
            .as_mut_slice()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, row)| {
                for (e, l) in cache.examples.iter().zip(&locals) {
                    let p = e.pooled[i];
                    if p != 0.0 {
                        row.iter_mut().zip(&l.d_pre).for_each(|(acc, g)| *acc += p * g);
                    }
                }
            });

        let n = self.embedding.dim();
        let mut filter_weights = Vec::with_capacity(self.banks.len());
        let mut filter_bias = Vec::with_capacity(self.banks.len());
        let mut offset = 0;
        for bank in &self.banks {
            let span = bank.height * n;
            let mut gw = Tensor2D::zeros(bank.count(), span);
            gw.as_mut_slice().par_chunks_mut(span).enumerate().for_each(|(f, row)| {
                for (e, l) in cache.examples.iter().zip(&locals) {
                    let g = l.d_conv[offset + f];
                    if let (Some(k), true) = (e.argmax[offset + f], g != 0.0) {
                        let window = &e.x[k * n..k * n + span];
                        row.iter_mut().zip(window).for_each(|(acc, x)| *acc += g * x);
                    }
                }
            });
            let mut gb = Tensor2D::zeros(1, bank.count());
            for l in &locals {
                for f in 0..bank.count() {
                    gb.set(0, f, gb.get(0, f) + l.d_conv[offset + f]);
                }
            }
            filter_weights.push(gw);
            filter_bias.push(gb);
            offset += bank.count();
        }

        let embedding = if self.embedding.trainable() {
            let per_example: Vec<Vec<f64>> = cache
                .examples
                .par_iter()
                .zip(&locals)
                .map(|(e, l)| {
                    let mut dx = vec![0.0; e.x.len()];
                    let mut offset = 0;
                    for bank in &self.banks {
                        let span = bank.height * n;
                        for f in 0..bank.count() {
                            let g = l.d_conv[offset + f];
                            if let (Some(k), true) = (e.argmax[offset + f], g != 0.0) {
                                dx[k * n..k * n + span]
                                    .iter_mut()
                                    .zip(bank.weights.row(f))
                                    .for_each(|(acc, w)| *acc += g * w);
                            }
                        }
                        offset += bank.count();
                    }
                    if let Some(mask) = &e.masks.input {
                        dx.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                    }
                    dx
                })
                .collect();
            let mut grad = Tensor2D::zeros(self.embedding.vocab().len(), n);
            for (e, dx) in cache.examples.iter().zip(&per_example) {
                for (pos, &id) in e.ids.iter().enumerate() {
                    if id == PAD_ID {
                        continue;
                    }
                    let row = grad.row_mut(id);
                    row.iter_mut().zip(&dx[pos * n..(pos + 1) * n]).for_each(|(acc, g)| *acc += g);
                }
            }
            Some(grad)
        } else {
            None
        };

        Ok(CnnGradients {
            embedding,
            filter_weights,
            filter_bias,
            dense_weights,
            dense_bias,
            output_weights,
            output_bias,
        })
    }
}
