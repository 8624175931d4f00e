//! Adam with bias correction and an externally driven learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{ChanError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiplier applied to the learning rate by [`AdamState::decay`].
    pub decay_factor: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay_factor: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub step_count: u64,
    pub learning_rate: f64,
    pub config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(ChanError::invalid("adam", "learning rate must be positive"));
        }
        if !(config.decay_factor > 0.0 && config.decay_factor <= 1.0) {
            return Err(ChanError::invalid("adam", "decay factor must lie in (0, 1]"));
        }
        let sizes: Vec<usize> = params.into_iter().map(Tensor::numel).collect();
        Ok(AdamState {
            step_count: 0,
            learning_rate: config.learning_rate,
            config,
            first_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    /// One update over `params`, which must be given in the same order and
    /// with the same sizes as at construction. Nothing is modified if any
    /// parameter lacks a gradient.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = (&'a str, &'a mut Tensor)>) -> Result<()> {
        let params: Vec<_> = params.into_iter().collect();
        if params.len() != self.first_moment.len() {
            return Err(ChanError::invalid(
                "adam",
                format!("expected {} parameters, got {}", self.first_moment.len(), params.len()),
            ));
        }
        for (i, (name, p)) in params.iter().enumerate() {
            if p.grad().is_none() {
                return Err(ChanError::MissingGradient(name.to_string()));
            }
            if p.numel() != self.first_moment[i].len() {
                return Err(ChanError::shape("adam", p.shape(), &[self.first_moment[i].len()]));
            }
        }
        self.step_count += 1;
        let AdamConfig { beta1, beta2, epsilon, .. } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let lr = self.learning_rate;
        for (i, (_, p)) in params.into_iter().enumerate() {
            let grad = p.grad().expect("checked above").to_vec();
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for (((x, g), m), v) in p.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *x -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }

    /// Multiplies the learning rate by the configured decay factor.
    pub fn decay(&mut self) {
        self.learning_rate *= self.config.decay_factor;
    }
}
