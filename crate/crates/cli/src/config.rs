use std::fs;
use std::path::{Path, PathBuf};

use podrom::data::FlameConfig;
use podrom::forecast::{Presets, TrainConfig};
use podrom::rom::{ModelConfig, PodConfig, RolloutConfig, RomConfig, SplitConfig};
use podrom::{Result, RomError};
use serde::{Deserialize, Serialize};

/// Whole config file. Every section is optional and unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    /// Replacement for the built-in training-case presets.
    pub presets: Option<PathBuf>,
    pub generate: FlameConfig,
    pub pod: PodConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub rollout: RolloutConfig,
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RomError::Config(e.to_string()))
    }

    /// Reads `path`, or returns defaults when no path is given. The raw bytes
    /// are returned for hashing.
    pub fn load(path: Option<&Path>) -> Result<(Self, Vec<u8>)> {
        match path {
            None => Ok((CliConfig::default(), Vec::new())),
            Some(p) => {
                let bytes = fs::read(p)?;
                let text = String::from_utf8(bytes.clone())
                    .map_err(|_| RomError::Config(format!("{} is not UTF-8", p.display())))?;
                let mut cfg = CliConfig::from_toml(&text)?;
                // relative presets paths are relative to the config file
                if let (Some(pre), Some(dir)) = (&cfg.presets, p.parent()) {
                    if pre.is_relative() {
                        cfg.presets = Some(dir.join(pre));
                    }
                }
                Ok((cfg, bytes))
            }
        }
    }

    pub fn presets(&self) -> Result<Presets> {
        match &self.presets {
            None => Ok(Presets::builtin()),
            Some(p) => Presets::from_toml(&fs::read_to_string(p)?),
        }
    }

    pub fn rom(&self) -> RomConfig {
        RomConfig {
            pod: self.pod.clone(),
            split: self.split,
            model: self.model,
            train: self.train.clone(),
            rollout: self.rollout,
        }
    }
}
