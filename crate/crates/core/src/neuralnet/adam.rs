use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};

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
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(RomError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(RomError::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(RomError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates applied so far.
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// One bias-corrected update; `lr` overrides `cfg.lr` so schedules can
    /// vary it per epoch.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &AdamConfig, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(RomError::InvalidInput(format!("learning rate must be positive, got {lr}")));
        }
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(RomError::mismatch("optimizer state", self.m.len(), params.len()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(3);
        let mut w = [1.0, -2.0, 0.5];
        s.step(&mut w, &[0.0; 3], &cfg, cfg.lr).unwrap();
        assert_eq!(w, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(1);
        let mut w = [0.0];
        s.step(&mut w, &[1.0], &cfg, cfg.lr).unwrap();
        assert!((w[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(1);
        let mut w = [1.0];
        for _ in 0..500 {
            let g = [2.0 * w[0]];
            s.step(&mut w, &g, &cfg, 0.01).unwrap();
        }
        assert!(w[0].abs() < 1e-2, "{}", w[0]);
    }

    #[test]
    fn rejects_bad_lr() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(1);
        assert!(s.step(&mut [0.0], &[1.0], &cfg, 0.0).is_err());
        assert!(s.step(&mut [0.0], &[1.0], &cfg, -1.0).is_err());
        assert!(AdamConfig { lr: 0.0, ..cfg }.validate().is_err());
    }
}
