use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A trainable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(Matrix::from_fn(1, 1, |_, _| v))
    }

    /// First entry; the value of a scalar parameter.
    pub fn get(&self) -> f64 {
        self.value.as_slice()[0]
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grad(&mut self) {
        self.grad.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

/// One bias-corrected Adam update of `value` at step `t` (1-based).
pub fn adam_step(value: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let c2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        value[i] -= cfg.lr * mh / (libm::sqrt(vh) + cfg.eps);
    }
}

/// First and second moments for an ordered parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Applies one update to every parameter, in the order used at creation.
    pub fn step(&mut self, cfg: &AdamConfig, params: &mut [&mut Param]) -> Result<()> {
        if params.len() != self.m.len() || params.iter().zip(&self.m).any(|(p, m)| p.len() != m.len()) {
            return Err(Error::StateMismatch("optimizer state does not match parameters".into()));
        }
        self.t += 1;
        for (i, p) in params.iter_mut().enumerate() {
            let Param { value, grad } = &mut **p;
            adam_step(value.as_mut_slice(), grad.as_slice(), &mut self.m[i], &mut self.v[i], self.t, cfg);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Param::new(Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64));
        let before = p.value.clone();
        let mut s = AdamState::new(&[6]);
        for _ in 0..10 {
            s.step(&AdamConfig::default(), &mut [&mut p]).unwrap();
        }
        assert_eq!(p.value, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::default();
        for g in [0.5, -3.0, 100.0] {
            let mut p = Param::scalar(1.0);
            p.grad.as_mut_slice()[0] = g;
            AdamState::new(&[1]).step(&cfg, &mut [&mut p]).unwrap();
            let step = 1.0 - p.get();
            let want = cfg.lr * g / (g.abs() + cfg.eps);
            assert!((step - want).abs() < 1e-15);
            assert!((step.abs() - cfg.lr).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let centre = [0.7, -1.3, 0.2];
        let curv = [1.0, 4.0, 0.5];
        let mut p = Param::new(Matrix::zeros(1, 3));
        let mut s = AdamState::new(&[3]);
        let cfg = AdamConfig { lr: 1e-2, ..AdamConfig::default() };
        for _ in 0..5000 {
            for k in 0..3 {
                p.grad.as_mut_slice()[k] = 2.0 * curv[k] * (p.value.as_slice()[k] - centre[k]);
            }
            s.step(&cfg, &mut [&mut p]).unwrap();
        }
        for k in 0..3 {
            assert!((p.value.as_slice()[k] - centre[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut p = Param::scalar(0.0);
        assert!(AdamState::new(&[2]).step(&AdamConfig::default(), &mut [&mut p]).is_err());
    }
}
