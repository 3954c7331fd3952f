use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};

/// Parabolic fuel-inlet velocity with a harmonic perturbation in time:
///
/// `v(r, t) = v_max (1 - r^2/R^2) [1 + (sum_m A_m sin(2 pi f_m t)) / divisor]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InletProfile {
    /// cm/s
    pub v_max: f64,
    pub radius: f64,
    /// `(amplitude, frequency in Hz)` pairs.
    pub terms: Vec<(f64, f64)>,
    pub divisor: f64,
}

impl InletProfile {
    /// Single-frequency perturbation, `v_max = 70 cm/s`, `A = 0.25`, `f = 20 Hz`.
    pub fn single_frequency() -> Self {
        InletProfile {
            v_max: 70.0,
            radius: 1.0,
            terms: vec![(0.25, 20.0)],
            divisor: 1.0,
        }
    }

    /// Three-frequency perturbation: `(0.9, 10 Hz)`, `(0.5, 40 Hz)`, `(0.75, 80 Hz)`,
    /// averaged over the three terms.
    pub fn three_frequency() -> Self {
        InletProfile {
            v_max: 70.0,
            radius: 1.0,
            terms: vec![(0.9, 10.0), (0.5, 40.0), (0.75, 80.0)],
            divisor: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(RomError::InvalidInput(format!(
                "nozzle radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.divisor > 0.0 && self.divisor.is_finite()) {
            return Err(RomError::InvalidInput(format!(
                "profile divisor must be positive, got {}",
                self.divisor
            )));
        }
        if !self.v_max.is_finite() || self.terms.iter().any(|(a, f)| !a.is_finite() || !f.is_finite())
        {
            return Err(RomError::NonFinite("inlet profile parameters".into()));
        }
        Ok(())
    }

    /// Relative perturbation `(sum_m A_m sin(2 pi f_m t)) / divisor`.
    pub fn modulation(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, f)| a * (2.0 * PI * f * t).sin())
            .sum::<f64>()
            / self.divisor
    }

    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..=self.radius).contains(&r) {
            return Err(RomError::InvalidInput(format!(
                "radial coordinate {r} outside [0, {}]",
                self.radius
            )));
        }
        let shape = 1.0 - (r * r) / (self.radius * self.radius);
        Ok(self.v_max * shape * (1.0 + self.modulation(t)))
    }
}
