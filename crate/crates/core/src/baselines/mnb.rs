use std::path::Path;

use super::persist::{read_file, write_file, Decoder, Encoder};
use super::{check_dim, check_labels, BaselineError, BowVector, Result};

/// Multinomial naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct MnbModel {
    alpha: f64,
    log_prior: [f64; 2],
    log_prob: [Vec<f64>; 2],
}

/// Fits class priors and smoothed per-class feature probabilities
/// `(count + alpha) / (total + alpha * dim)`.
pub fn train_mnb(xs: &[BowVector], labels: &[u8], dim: usize, alpha: f64) -> Result<MnbModel> {
    check_labels(xs.len(), labels)?;
    check_dim(xs, dim)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(BaselineError::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    if dim == 0 {
        return Err(BaselineError::InvalidParameter("feature dimension is 0".into()));
    }
    let mut docs = [0usize; 2];
    let mut counts = [vec![0.0; dim], vec![0.0; dim]];
    for (x, &y) in xs.iter().zip(labels) {
        docs[y as usize] += 1;
        for &(i, v) in x.entries() {
            counts[y as usize][i] += v;
        }
    }
    for c in 0..2 {
        if docs[c] == 0 {
            return Err(BaselineError::EmptyClass(c as u8));
        }
    }
    let n = xs.len() as f64;
    let log_prior = [(docs[0] as f64 / n).ln(), (docs[1] as f64 / n).ln()];
    let log_prob = counts.map(|c| {
        let total: f64 = c.iter().sum();
        let denom = total + alpha * dim as f64;
        c.iter().map(|&v| ((v + alpha) / denom).ln()).collect()
    });
    Ok(MnbModel {
        alpha,
        log_prior,
        log_prob,
    })
}

impl MnbModel {
    const KIND: &'static str = "mnb";

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.log_prob[0].len()
    }

    pub fn log_prior(&self) -> [f64; 2] {
        self.log_prior
    }

    pub fn log_prob(&self, class: u8) -> &[f64] {
        &self.log_prob[class as usize]
    }

    /// Unnormalized log posteriors: log prior plus count-weighted log probabilities.
    pub fn log_posteriors(&self, x: &BowVector) -> Result<[f64; 2]> {
        check_dim(std::slice::from_ref(x), self.dim())?;
        Ok([0, 1].map(|c| {
            self.log_prior[c]
                + x.entries()
                    .iter()
                    .map(|&(i, v)| v * self.log_prob[c][i])
                    .sum::<f64>()
        }))
    }

    /// Higher posterior wins; exact ties go to class 0.
    pub fn predict(&self, x: &BowVector) -> Result<u8> {
        let lp = self.log_posteriors(x)?;
        Ok(u8::from(lp[1] > lp[0]))
    }

    pub fn predict_all(&self, xs: &[BowVector]) -> Result<Vec<u8>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new(Self::KIND);
        e.f64(self.alpha);
        e.f64s(&self.log_prior);
        e.f64s(&self.log_prob[0]);
        e.f64s(&self.log_prob[1]);
        e.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(buf, Self::KIND)?;
        let alpha = d.f64()?;
        let prior = d.f64s()?;
        let p0 = d.f64s()?;
        let p1 = d.f64s()?;
        d.finish()?;
        if prior.len() != 2 || p0.len() != p1.len() {
            return Err(BaselineError::BadModel("inconsistent naive Bayes tables".into()));
        }
        Ok(Self {
            alpha,
            log_prior: [prior[0], prior[1]],
            log_prob: [p0, p1],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
