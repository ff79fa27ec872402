//! Adam with decoupled weight decay.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<DenseMatrix>,
    pub second_moment: Vec<DenseMatrix>,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &[DenseMatrix]) -> Self {
        let zeros: Vec<DenseMatrix> =
            params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect();
        AdamState { config, step: 0, first_moment: zeros.clone(), second_moment: zeros }
    }

    /// One update of every tensor in `params` from `grads`.
    ///
    /// The decay term `lr * weight_decay * w` is applied to the weights
    /// directly and never enters the moment estimates.
    pub fn step(&mut self, params: &mut [&mut DenseMatrix], grads: &[DenseMatrix]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: (params.len(), 1),
                right: (grads.len(), 1),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Dimension { op: "adam_step", left: p.shape(), right: g.shape() });
            }
        }

        self.step += 1;
        let AdamConfig { learning_rate: lr, beta1, beta2, epsilon, weight_decay } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - libm::pow(beta1, t as f64);
        let bias2 = 1.0 - libm::pow(beta2, t as f64);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            let ps = p.as_mut_slice();
            let gs = g.as_slice();
            let ms = m.as_mut_slice();
            let vs = v.as_mut_slice();
            for i in 0..ps.len() {
                ms[i] = beta1 * ms[i] + (1.0 - beta1) * gs[i];
                vs[i] = beta2 * vs[i] + (1.0 - beta2) * gs[i] * gs[i];
                let m_hat = ms[i] / bias1;
                let v_hat = vs[i] / bias2;
                ps[i] -= lr * (m_hat / (libm::sqrt(v_hat) + epsilon) + weight_decay * ps[i]);
            }
        }
        Ok(())
    }
}
