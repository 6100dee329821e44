//! Deterministic numerical substrate shared by every learning module.

mod adam;
mod rng;
mod tensor;

pub use adam::{AdamHyper, AdamState};
pub use rng::Rng;
pub use tensor::{relu, sigmoid, Tensor2D};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("function value is not finite at coordinate {0}")]
    NonFinite(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Samples an inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Result<Tensor2D> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumericsError::InvalidRate(rate));
    }
    if rate == 0.0 {
        return Ok(Tensor2D::filled(rows, cols, 1.0));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    Tensor2D::from_vec(rows, cols, data)
}

/// Central-difference gradient of `f` at `x`:
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor2D, h: f64) -> Result<Tensor2D>
where
    F: FnMut(&Tensor2D) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Tensor2D::zeros(x.rows(), x.cols());
    for i in 0..x.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let plus = f(&probe);
        probe.as_mut_slice()[i] = orig - h;
        let minus = f(&probe);
        probe.as_mut_slice()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NumericsError::NonFinite(i));
        }
        grad.as_mut_slice()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Relative error `||a - b|| / max(||a|| + ||b||, tiny)` used by gradient checks.
pub fn relative_error(a: &Tensor2D, b: &Tensor2D) -> f64 {
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.frobenius_norm() + b.frobenius_norm();
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}
