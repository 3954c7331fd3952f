use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scaler::ScalerKind;
use super::train::{LossKind, TrainConfig};
use crate::error::{Result, RomError};
use crate::neuralnet::Activation;

const BUILTIN: &str = include_str!("../../presets.toml");

/// The toggles a named training case sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CasePreset {
    pub scaling: ScalerKind,
    pub lr: f64,
    #[serde(default = "one")]
    pub lr_factor: f64,
    #[serde(default)]
    pub lr_interval: usize,
    pub loss: LossKind,
    pub hidden: Activation,
    pub output: Activation,
}

fn one() -> f64 {
    1.0
}

impl CasePreset {
    pub fn apply(&self, name: &str, cfg: &mut TrainConfig) {
        cfg.case = name.to_string();
        cfg.scaling = self.scaling;
        cfg.lr = self.lr;
        cfg.lr_factor = self.lr_factor;
        cfg.lr_interval = self.lr_interval;
        cfg.loss = self.loss;
        cfg.hidden = self.hidden;
        cfg.output = self.output;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Presets {
    pub case: BTreeMap<String, CasePreset>,
}

impl Presets {
    /// Cases 0 and A to E shipped with the crate.
    pub fn builtin() -> Self {
        Presets::from_toml(BUILTIN).expect("built-in presets parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RomError::Config(format!("presets: {e}")))
    }

    pub fn get(&self, name: &str) -> Result<&CasePreset> {
        self.case.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.case.keys().map(String::as_str).collect();
            RomError::Config(format!("unknown case `{name}` (known: {})", known.join(", ")))
        })
    }

    /// `TrainConfig::default()` with the named case applied.
    pub fn config(&self, name: &str) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        self.get(name)?.apply(name, &mut cfg);
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_cases() {
        let p = Presets::builtin();
        assert_eq!(p.case.keys().cloned().collect::<Vec<_>>(), ["0", "A", "B", "C", "D", "E"]);
        let e = p.config("E").unwrap();
        assert_eq!((e.hidden, e.output), (Activation::Elu, Activation::Tanh));
        assert_eq!((e.loss, e.scaling), (LossKind::PaMse, ScalerKind::SumOfMaxima));
        assert_eq!((e.lr, e.lr_factor, e.lr_interval), (0.005, 0.8, 10));
        let zero = p.config("0").unwrap();
        assert_eq!((zero.hidden, zero.output), (Activation::Relu, Activation::Sigmoid));
        assert_eq!((zero.loss, zero.scaling, zero.lr), (LossKind::Mse, ScalerKind::Range, 0.001));
        assert_eq!(zero.lr_interval, 0);
        // B/E differ only in loss, D/E only in schedule
        let (b, d) = (p.get("B").unwrap(), p.get("D").unwrap());
        let e = p.get("E").unwrap();
        assert_eq!(CasePreset { loss: LossKind::PaMse, ..*b }, *e);
        assert_eq!(CasePreset { lr: 0.005, lr_factor: 0.8, lr_interval: 10, ..*d }, *e);
        assert!(p.get("Z").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[case.X]\nscaling = \"range\"\nlr = 0.1\nloss = \"mse\"\nhidden = \"relu\"\noutput = \"tanh\"\nmomentum = 0.9\n";
        assert!(Presets::from_toml(text).is_err());
    }
}
