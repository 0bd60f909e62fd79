use crate::error::{DiffError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers are created on the first step from
/// the parameter shapes and checked on every later step.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(DiffError::ShapeMismatch {
                op: "adam_step",
                left: [params.len(), 0],
                right: [grads.len(), 0],
            });
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(DiffError::ShapeMismatch {
                op: "adam_step",
                left: [self.first.len(), 0],
                right: [params.len(), 0],
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(DiffError::ShapeMismatch {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::row(vec![0.3, -1.2, 5.0]);
        let before = p.clone();
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        adam.step(&mut [&mut p], &[Tensor::zeros(1, 3)]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = 1, v_hat = 1 after bias correction -> step = lr / (1 + eps)
        let mut p = Tensor::scalar(0.0);
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        adam.step(&mut [&mut p], &[Tensor::scalar(1.0)]).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-15);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut p = Tensor::zeros(2, 2);
        let mut adam = Adam::new(AdamConfig::default());
        assert!(adam.step(&mut [&mut p], &[Tensor::zeros(1, 4)]).is_err());
        assert!(adam.step(&mut [&mut p], &[]).is_err());
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let run = || {
            let mut p = Tensor::row(vec![1.0, -2.0]);
            let mut adam = Adam::new(AdamConfig::with_lr(0.05));
            for k in 0..50 {
                let g = p.map(|x| 2.0 * x + 0.01 * k as f64);
                adam.step(&mut [&mut p], &[g]).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
