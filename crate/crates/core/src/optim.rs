//! Adaptive-moment gradient descent over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("moment coefficients must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Optimizer state. Each coordinate has its own step size so that parameter
/// blocks with different units can share one optimizer.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, lr: Vec<f64>) -> Self {
        let n = lr.len();
        Self {
            cfg,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One update of `params` against `grad`, with step sizes multiplied by `lr_scale`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr_scale: f64) -> Result<()> {
        check_len("optimizer parameters", self.lr.len(), params.len())?;
        check_len("optimizer gradient", self.lr.len(), grad.len())?;
        self.t += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr_scale * self.lr[i] * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(AdamConfig::default(), vec![0.1, 0.5]);
        let mut x = vec![1.0, -2.0];
        adam.step(&mut x, &[3.0, -0.001], 1.0).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-6);
        assert!((x[1] + 1.5).abs() < 1e-4);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(AdamConfig::default(), vec![0.05; 3]);
        let target = [1.0, -2.0, 0.5];
        let mut x = vec![0.0; 3];
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            adam.step(&mut x, &g, 1.0).unwrap();
        }
        for (a, b) in x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_rate_leaves_parameters() {
        let mut adam = Adam::new(AdamConfig::default(), vec![0.0; 2]);
        let mut x = vec![1.0, 2.0];
        adam.step(&mut x, &[5.0, 5.0], 1.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }
}
