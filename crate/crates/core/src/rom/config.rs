use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_SIGMA_FLOOR;
use crate::error::{Result, RomError};
use crate::forecast::{Stride, TrainConfig, DEFAULT_TEST_FRACTION, DEFAULT_TRAIN_FRACTION};
use crate::neuralnet::{ModelKind, NetworkSpec, DEFAULT_UNITS};
use crate::pod::{EnergyMetric, Truncation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PodConfig {
    /// Keep exactly this many modes.
    pub modes: Option<usize>,
    /// Keep the fewest modes reaching this energy fraction.
    pub energy: Option<f64>,
    pub metric: EnergyMetric,
    /// Variables with a pooled standard deviation at or below this are rejected.
    pub sigma_floor: f64,
}

impl Default for PodConfig {
    fn default() -> Self {
        PodConfig {
            modes: None,
            energy: None,
            metric: EnergyMetric::SingularSum,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
        }
    }
}

impl PodConfig {
    /// Without `modes` or `energy` every resolved mode is kept.
    pub fn truncation(&self) -> Result<Truncation> {
        match (self.modes, self.energy) {
            (Some(_), Some(_)) => Err(RomError::Config("set either pod.modes or pod.energy, not both".into())),
            (Some(n), None) => Ok(Truncation::ModeCount(n)),
            (None, Some(e)) => {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(RomError::Config(format!("pod.energy must lie in (0, 1], got {e}")));
                }
                Ok(Truncation::EnergyTarget(e))
            }
            (None, None) => Ok(Truncation::EnergyTarget(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Share of the non-test snapshots used for training; the rest validates.
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: DEFAULT_TEST_FRACTION,
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub units: usize,
    /// Input window `q`.
    pub window: usize,
    /// Forecast horizon `p`.
    pub horizon: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Lstm,
            units: DEFAULT_UNITS,
            window: 10,
            horizon: 6,
        }
    }
}

impl ModelConfig {
    /// Architecture for `n_modes` features; activations are set at training time.
    pub fn spec(&self, n_modes: usize) -> NetworkSpec {
        match self.kind {
            ModelKind::Lstm => NetworkSpec::lstm(n_modes, self.horizon, self.window, self.units),
            ModelKind::Cnn => NetworkSpec::cnn(n_modes, self.horizon, self.window),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutConfig {
    pub stride: Stride,
}

/// Everything `fit_pipeline` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RomConfig {
    pub pod: PodConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub rollout: RolloutConfig,
}

impl RomConfig {
    pub fn validate(&self) -> Result<()> {
        self.pod.truncation()?;
        if !(self.pod.sigma_floor > 0.0) {
            return Err(RomError::Config("pod.sigma_floor must be positive".into()));
        }
        for (name, f) in [
            ("split.test_fraction", self.split.test_fraction),
            ("split.train_fraction", self.split.train_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(RomError::Config(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        self.model.spec(1).validate().map_err(|e| RomError::Config(format!("model: {e}")))?;
        self.train.validate()
    }
}
