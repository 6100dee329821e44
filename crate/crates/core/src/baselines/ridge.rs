use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::persist::{read_file, write_file, Decoder, Encoder};
use super::{check_dim, check_labels, BaselineError, BowVector, Result};

/// Pivots below this fraction of the largest diagonal entry count as singular.
const SINGULAR_TOL: f64 = 1e-12;

/// Linear classifier fitted by L2-penalised least squares on ±1 targets.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    lambda: f64,
    weights: Vec<f64>,
}

fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, &v| m.max(v));
    let chol = a.cholesky().ok_or(BaselineError::Singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, &v| m.min(v * v));
    if !(min_pivot > SINGULAR_TOL * max_diag) {
        return Err(BaselineError::Singular);
    }
    Ok(chol.solve(&b))
}

/// Solves `(XᵀX + λI) w = Xᵀy` with `y ∈ {-1, +1}`. With λ > 0 and more
/// features than documents the equivalent dual system `(XXᵀ + λI) a = y`,
/// `w = Xᵀa` is solved instead.
pub fn ridge_fit(xs: &[BowVector], labels: &[u8], dim: usize, lambda: f64) -> Result<RidgeModel> {
    check_labels(xs.len(), labels)?;
    check_dim(xs, dim)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(BaselineError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let n = xs.len();
    let weights = if lambda > 0.0 && dim > n {
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = xs[i].dot(&xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += lambda;
        }
        let a = solve_spd(k, DVector::from_vec(y))?;
        let mut w = vec![0.0; dim];
        for (x, &ai) in xs.iter().zip(a.iter()) {
            for &(f, v) in x.entries() {
                w[f] += ai * v;
            }
        }
        w
    } else {
        let mut g = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        for (x, &yi) in xs.iter().zip(&y) {
            for &(i, vi) in x.entries() {
                b[i] += vi * yi;
                for &(j, vj) in x.entries() {
                    g[(i, j)] += vi * vj;
                }
            }
        }
        for i in 0..dim {
            g[(i, i)] += lambda;
        }
        solve_spd(g, b)?.iter().copied().collect()
    };
    Ok(RidgeModel { lambda, weights })
}

impl RidgeModel {
    const KIND: &'static str = "ridge";

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn score(&self, x: &BowVector) -> Result<f64> {
        check_dim(std::slice::from_ref(x), self.weights.len())?;
        Ok(x.dot_dense(&self.weights))
    }

    /// Sign of the score; zero counts as positive.
    pub fn predict(&self, x: &BowVector) -> Result<u8> {
        Ok(u8::from(self.score(x)? >= 0.0))
    }

    pub fn predict_all(&self, xs: &[BowVector]) -> Result<Vec<u8>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new(Self::KIND);
        e.f64(self.lambda);
        e.f64s(&self.weights);
        e.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(buf, Self::KIND)?;
        let lambda = d.f64()?;
        let weights = d.f64s()?;
        d.finish()?;
        Ok(Self { lambda, weights })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
