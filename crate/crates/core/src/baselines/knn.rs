use std::path::Path;

use super::persist::{read_file, write_file, Decoder, Encoder};
use super::{check_labels, BaselineError, BowVector, Result};

/// Cosine k-nearest-neighbour classifier over stored training vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    points: Vec<BowVector>,
    norms: Vec<f64>,
    labels: Vec<u8>,
    k: usize,
}

/// Cosine distance `1 - cos`; a zero vector is at distance 1 from everything.
pub(crate) fn cosine_distance(a: &BowVector, na: f64, b: &BowVector, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - a.dot(b) / (na * nb)
}

impl KnnModel {
    const KIND: &'static str = "knn";

    pub fn fit(points: Vec<BowVector>, labels: Vec<u8>, k: usize) -> Result<Self> {
        check_labels(points.len(), &labels)?;
        if k == 0 || k > points.len() {
            return Err(BaselineError::InvalidParameter(format!(
                "k must lie in 1..={}, got {k}",
                points.len()
            )));
        }
        let norms = points.iter().map(BowVector::norm).collect();
        Ok(Self {
            points,
            norms,
            labels,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the k nearest training points, nearest first; equal
    /// distances keep the lower index first.
    pub fn neighbors(&self, query: &BowVector) -> Vec<usize> {
        let nq = query.norm();
        let mut scored: Vec<(f64, usize)> = self
            .points
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (p, &np))| (cosine_distance(query, nq, p, np), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    /// Majority label among the neighbours; tied votes go to class 0.
    pub fn predict(&self, query: &BowVector) -> u8 {
        let ones = self
            .neighbors(query)
            .iter()
            .filter(|&&i| self.labels[i] == 1)
            .count();
        u8::from(2 * ones > self.k)
    }

    pub fn predict_all(&self, queries: &[BowVector]) -> Vec<u8> {
        queries.iter().map(|q| self.predict(q)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new(Self::KIND);
        e.u64(self.k as u64);
        e.u64(self.points.len() as u64);
        for (p, &y) in self.points.iter().zip(&self.labels) {
            e.u64(u64::from(y));
            e.u64(p.entries().len() as u64);
            for &(i, v) in p.entries() {
                e.u64(i as u64);
                e.f64(v);
            }
        }
        e.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(buf, Self::KIND)?;
        let k = d.u64()? as usize;
        let n = d.u64()? as usize;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            labels.push(u8::try_from(d.u64()?).map_err(|_| BaselineError::BadModel("bad label".into()))?);
            let len = d.u64()? as usize;
            let mut pairs = Vec::new();
            for _ in 0..len {
                pairs.push((d.u64()? as usize, d.f64()?));
            }
            points.push(BowVector::from_pairs(pairs));
        }
        d.finish()?;
        Self::fit(points, labels, k)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// One-shot prediction without keeping a model.
pub fn knn_predict(train: &[BowVector], labels: &[u8], query: &BowVector, k: usize) -> Result<u8> {
    Ok(KnnModel::fit(train.to_vec(), labels.to_vec(), k)?.predict(query))
}
