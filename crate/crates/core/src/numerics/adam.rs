use super::{NumericsError, Result, Tensor2D};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NumericsError::InvalidHyper(format!("{self:?}")))
        }
    }
}

/// Per-tensor Adam accumulators with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Tensor2D,
    second_moment: Tensor2D,
    step_count: u64,
    hyper: AdamHyper,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            first_moment: Tensor2D::zeros(rows, cols),
            second_moment: Tensor2D::zeros(rows, cols),
            step_count: 0,
            hyper,
        })
    }

    pub fn for_params(params: &Tensor2D, hyper: AdamHyper) -> Result<Self> {
        Self::new(params.rows(), params.cols(), hyper)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &Tensor2D {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Tensor2D {
        &self.second_moment
    }

    pub fn hyper(&self) -> AdamHyper {
        self.hyper
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut Tensor2D, grads: &Tensor2D) -> Result<()> {
        let shape = self.first_moment.shape();
        for got in [params.shape(), grads.shape()] {
            if got != shape {
                return Err(NumericsError::ShapeMismatch {
                    expected: shape,
                    got,
                });
            }
        }
        let AdamHyper {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.hyper;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let m = self.first_moment.as_mut_slice();
        let v = self.second_moment.as_mut_slice();
        for (((p, &g), m), v) in params
            .as_mut_slice()
            .iter_mut()
            .zip(grads.as_slice())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}
