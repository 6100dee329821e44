use std::path::Path;

use super::persist::{read_file, write_file, Decoder, Encoder};
use super::{check_dim, check_labels, densify, BaselineError, BowVector, Result};
use crate::numerics::{dropout_mask, Rng, Tensor2D};

#[derive(Debug, Clone, PartialEq)]
pub struct DnnConfig {
    pub hidden_layers: usize,
    pub units: usize,
    pub input_dropout: f64,
    pub hidden_dropout: f64,
    /// Number of leading hidden layers followed by dropout.
    pub dropout_layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DnnConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 5,
            units: 8,
            input_dropout: 0.5,
            hidden_dropout: 0.5,
            dropout_layers: 2,
            learning_rate: 0.04,
            batch_size: 32,
            epochs: 50,
            seed: 1,
        }
    }
}

impl DnnConfig {
    pub fn without_dropout(mut self) -> Self {
        self.input_dropout = 0.0;
        self.hidden_dropout = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BaselineError::InvalidParameter(m.into()));
        if self.units == 0 || self.batch_size == 0 {
            return bad("units and batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.input_dropout) || !(0.0..1.0).contains(&self.hidden_dropout) {
            return bad("dropout rates must lie in [0, 1)");
        }
        if self.dropout_layers > self.hidden_layers {
            return bad("dropout_layers exceeds hidden_layers");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        Ok(())
    }
}

/// Feedforward ReLU network with a two-way softmax output. `layers[i]` is
/// `(weights: in x out, bias: 1 x out)`; the last layer is the output.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnModel {
    config: DnnConfig,
    layers: Vec<(Tensor2D, Tensor2D)>,
}

struct Trace {
    inputs: Vec<Tensor2D>,
    pre: Vec<Tensor2D>,
    masks: Vec<Option<Tensor2D>>,
    probs: Tensor2D,
}

fn log_softmax_rows(z: &Tensor2D) -> Tensor2D {
    let mut out = z.clone();
    for r in 0..z.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

fn col_sums(t: &Tensor2D) -> Tensor2D {
    let mut out = Tensor2D::zeros(1, t.cols());
    for r in 0..t.rows() {
        for (acc, v) in out.as_mut_slice().iter_mut().zip(t.row(r)) {
            *acc += v;
        }
    }
    out
}

impl DnnModel {
    const KIND: &'static str = "dnn";

    pub fn new(input_dim: usize, config: DnnConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(BaselineError::InvalidParameter("input dimension is 0".into()));
        }
        let mut layers = Vec::with_capacity(config.hidden_layers + 1);
        let mut fan_in = input_dim;
        for l in 0..=config.hidden_layers {
            let out = if l == config.hidden_layers { 2 } else { config.units };
            let gain = if l == config.hidden_layers { 3.0 } else { 6.0 };
            let limit = (gain / fan_in as f64).sqrt();
            layers.push((
                Tensor2D::random_uniform(fan_in, out, -limit, limit, rng),
                Tensor2D::zeros(1, out),
            ));
            fan_in = out;
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &DnnConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].0.rows()
    }

    pub fn layers(&self) -> &[(Tensor2D, Tensor2D)] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [(Tensor2D, Tensor2D)] {
        &mut self.layers
    }

    fn run(&self, x: &Tensor2D, mut rng: Option<&mut Rng>) -> Result<Trace> {
        let c = &self.config;
        let mut h = x.clone();
        let mut masks = Vec::new();
        let input_mask = match rng.as_deref_mut() {
            Some(r) if c.input_dropout > 0.0 => Some(dropout_mask(h.rows(), h.cols(), c.input_dropout, r)?),
            _ => None,
        };
        if let Some(m) = &input_mask {
            h = h.hadamard(m)?;
        }
        masks.push(input_mask);
        let mut inputs = Vec::new();
        let mut pre = Vec::new();
        let last = self.layers.len() - 1;
        for (l, (w, b)) in self.layers.iter().enumerate() {
            let z = h.matmul(w)?.add_row(b)?;
            inputs.push(h);
            if l == last {
                pre.push(z);
                break;
            }
            let mut a = z.map(|v| v.max(0.0));
            pre.push(z);
            let mask = match rng.as_deref_mut() {
                Some(r) if l < c.dropout_layers && c.hidden_dropout > 0.0 => {
                    Some(dropout_mask(a.rows(), a.cols(), c.hidden_dropout, r)?)
                }
                _ => None,
            };
            if let Some(m) = &mask {
                a = a.hadamard(m)?;
            }
            masks.push(mask);
            h = a;
        }
        let probs = pre[last].softmax_rows();
        Ok(Trace {
            inputs,
            pre,
            masks,
            probs,
        })
    }

    /// Eval-mode class probabilities, one row per input row.
    pub fn forward(&self, x: &Tensor2D) -> Result<Tensor2D> {
        Ok(self.run(x, None)?.probs)
    }

    /// Mean cross-entropy in eval mode.
    pub fn loss(&self, x: &Tensor2D, labels: &[u8]) -> Result<f64> {
        check_labels(x.rows(), labels)?;
        let trace = self.run(x, None)?;
        let logp = log_softmax_rows(trace.pre.last().expect("output layer"));
        Ok(-labels.iter().enumerate().map(|(r, &y)| logp.get(r, y as usize)).sum::<f64>() / labels.len() as f64)
    }

    /// Mean cross-entropy and its gradient for every layer. Dropout is
    /// sampled when `rng` is given.
    pub fn loss_and_gradients(
        &self,
        x: &Tensor2D,
        labels: &[u8],
        rng: Option<&mut Rng>,
    ) -> Result<(f64, Vec<(Tensor2D, Tensor2D)>)> {
        check_labels(x.rows(), labels)?;
        let trace = self.run(x, rng)?;
        let n = labels.len() as f64;
        let logp = log_softmax_rows(trace.pre.last().expect("output layer"));
        let loss = -labels.iter().enumerate().map(|(r, &y)| logp.get(r, y as usize)).sum::<f64>() / n;
        let mut delta = trace.probs.clone();
        for (r, &y) in labels.iter().enumerate() {
            delta.set(r, y as usize, delta.get(r, y as usize) - 1.0);
        }
        let mut delta = delta.scale(1.0 / n);
        let mut grads = vec![(Tensor2D::zeros(0, 0), Tensor2D::zeros(0, 0)); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let (w, _) = &self.layers[l];
            grads[l] = (trace.inputs[l].transpose().matmul(&delta)?, col_sums(&delta));
            if l == 0 {
                break;
            }
            let mut dh = delta.matmul(&w.transpose())?;
            if let Some(m) = &trace.masks[l] {
                dh = dh.hadamard(m)?;
            }
            let z = &trace.pre[l - 1];
            for (g, &zv) in dh.as_mut_slice().iter_mut().zip(z.as_slice()) {
                if zv <= 0.0 {
                    *g = 0.0;
                }
            }
            delta = dh;
        }
        Ok((loss, grads))
    }

    /// Argmax of the softmax; equal probabilities give class 0.
    pub fn predict_all(&self, xs: &[BowVector]) -> Result<Vec<u8>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        check_dim(xs, self.input_dim())?;
        let probs = self.forward(&densify(xs, self.input_dim())?)?;
        Ok((0..probs.rows()).map(|r| u8::from(probs.get(r, 1) > probs.get(r, 0))).collect())
    }

    pub fn predict(&self, x: &BowVector) -> Result<u8> {
        Ok(self.predict_all(std::slice::from_ref(x))?[0])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut e = Encoder::new(Self::KIND);
        for v in [c.hidden_layers, c.units, c.dropout_layers, c.batch_size, c.epochs] {
            e.u64(v as u64);
        }
        e.u64(c.seed);
        for v in [c.input_dropout, c.hidden_dropout, c.learning_rate] {
            e.f64(v);
        }
        for (w, b) in &self.layers {
            e.tensor(w);
            e.tensor(b);
        }
        e.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(buf, Self::KIND)?;
        let mut u = || d.u64().map(|v| v as usize);
        let (hidden_layers, units, dropout_layers, batch_size, epochs) = (u()?, u()?, u()?, u()?, u()?);
        let seed = d.u64()?;
        let config = DnnConfig {
            hidden_layers,
            units,
            input_dropout: d.f64()?,
            hidden_dropout: d.f64()?,
            dropout_layers,
            learning_rate: d.f64()?,
            batch_size,
            epochs,
            seed,
        };
        config.validate()?;
        let mut layers = Vec::new();
        for _ in 0..=hidden_layers {
            layers.push((d.tensor()?, d.tensor()?));
        }
        d.finish()?;
        let chained = layers.windows(2).all(|p| p[0].0.cols() == p[1].0.rows());
        let biases = layers.iter().all(|(w, b)| b.shape() == (1, w.cols()));
        if !chained || !biases || layers.last().map(|l| l.0.cols()) != Some(2) {
            return Err(BaselineError::BadModel("inconsistent layer shapes".into()));
        }
        Ok(Self { config, layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// Mini-batch gradient descent on shuffled batches at the configured rate.
pub fn train_dnn(xs: &[BowVector], labels: &[u8], dim: usize, config: &DnnConfig) -> Result<DnnModel> {
    check_labels(xs.len(), labels)?;
    check_dim(xs, dim)?;
    let mut rng = Rng::derive(config.seed, "dnn");
    let mut model = DnnModel::new(dim, config.clone(), &mut rng)?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<BowVector> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let ys: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let x = densify(&batch, dim)?;
            let (_, grads) = model.loss_and_gradients(&x, &ys, Some(&mut rng))?;
            for ((w, b), (gw, gb)) in model.layers.iter_mut().zip(&grads) {
                w.axpy(-config.learning_rate, gw)?;
                b.axpy(-config.learning_rate, gb)?;
            }
        }
    }
    Ok(model)
}
