use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scaler::ScalerKind;
use super::split::Windows;
use crate::error::{Result, RomError};
use crate::neuralnet::{Activation, AdamConfig, AdamState, LossSpec, LossValue, Network, NetworkSpec};

/// Smallest validation-loss decrease that counts as an improvement.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    PaMse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Free-form label, usually the preset name.
    pub case: String,
    pub scaling: ScalerKind,
    pub loss: LossKind,
    /// Weight of the mass-balance term in the physics-aware loss.
    pub pa_weight: f64,
    pub hidden: Activation,
    pub output: Activation,
    pub lr: f64,
    /// Multiply the learning rate by `lr_factor` every `lr_interval` epochs;
    /// `lr_interval = 0` keeps it constant.
    pub lr_factor: f64,
    pub lr_interval: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            case: "0".into(),
            scaling: ScalerKind::Range,
            loss: LossKind::Mse,
            pa_weight: 1.0,
            hidden: Activation::Relu,
            output: Activation::Sigmoid,
            lr: adam.lr,
            lr_factor: 1.0,
            lr_interval: 0,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            batch_size: 12,
            max_epochs: 100,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if !(self.lr_factor > 0.0 && self.lr_factor <= 1.0) {
            return Err(RomError::Config(format!("lr_factor must lie in (0, 1], got {}", self.lr_factor)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(RomError::Config("batch_size and max_epochs must be >= 1".into()));
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return Err(RomError::Config(format!(
                "patience must lie in [1, max_epochs = {}], got {}",
                self.max_epochs, self.patience
            )));
        }
        if !(self.pa_weight >= 0.0 && self.pa_weight.is_finite()) {
            return Err(RomError::Config(format!("pa_weight must be >= 0, got {}", self.pa_weight)));
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (1-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.lr_interval == 0 {
            return self.lr;
        }
        let drops = (epoch.max(1) - 1) / self.lr_interval;
        self.lr * self.lr_factor.powi(drops as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Wall-clock duration; kept out of the CSV so the CSV is reproducible.
    pub seconds: f64,
}

impl TrainReport {
    pub fn stop_epoch(&self) -> usize {
        self.epochs.last().map_or(0, |e| e.epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr,train_mse,val_mse\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e}",
                e.epoch, e.train_loss, e.val_loss, e.lr, e.train_mse, e.val_mse
            );
        }
        s
    }
}

/// Tracks the best validation loss and how long ago it was seen.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    since: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since: 0,
        }
    }

    /// Records an epoch; returns `true` if it improved on the best so far.
    pub fn observe(&mut self, epoch: usize, val: f64) -> bool {
        if val < self.best - IMPROVEMENT_EPS || self.best_epoch == 0 {
            self.best = val;
            self.best_epoch = epoch;
            self.since = 0;
            true
        } else {
            self.since += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since >= self.patience
    }
}

fn diverged(epoch: usize) -> impl Fn(RomError) -> RomError {
    move |e| match e {
        RomError::NonFinite(detail) => RomError::Diverged { epoch, detail },
        other => other,
    }
}

/// Mini-batch Adam with early stopping. The activations of `spec` are taken
/// from `cfg`. Returns the network at the best validation epoch.
pub fn train(
    spec: NetworkSpec,
    cfg: &TrainConfig,
    train_windows: &Windows,
    val_windows: &Windows,
    loss: &LossSpec,
) -> Result<(Network, TrainReport)> {
    train_with(spec, cfg, train_windows, val_windows, loss, |_| {})
}

/// As [`train`], calling `progress` after every epoch.
pub fn train_with(
    spec: NetworkSpec,
    cfg: &TrainConfig,
    train_windows: &Windows,
    val_windows: &Windows,
    loss: &LossSpec,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<(Network, TrainReport)> {
    cfg.validate()?;
    if train_windows.is_empty() || val_windows.is_empty() {
        return Err(RomError::SplitTooSmall("training needs at least one window per split".into()));
    }
    let spec = spec.with_activations(cfg.hidden, cfg.output);
    let start = Instant::now();
    let mut net = Network::new(spec, cfg.seed)?;
    let adam = cfg.adam();
    let mut state = AdamState::new(net.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let train_pairs = train_windows.pairs();
    let val_pairs = val_windows.pairs();
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = net.clone();
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut sum = LossValue::default();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], &[f64])> = chunk.iter().map(|&i| train_pairs[i]).collect();
            let value = net.loss_and_gradient(&batch, loss).map_err(diverged(epoch))?;
            if !value.total.is_finite() {
                return Err(RomError::Diverged {
                    epoch,
                    detail: "non-finite training loss".into(),
                });
            }
            sum.accumulate(&value, chunk.len() as f64 / train_pairs.len() as f64);
            let Network { params, .. } = &mut net;
            state.step(&mut params.values, &params.grads, &adam, lr)?;
        }
        let val = net.loss(&val_pairs, loss).map_err(diverged(epoch))?;
        if !val.total.is_finite() {
            return Err(RomError::Diverged {
                epoch,
                detail: "non-finite validation loss".into(),
            });
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: sum.total,
            val_loss: val.total,
            train_mse: sum.mse,
            val_mse: val.mse,
        };
        progress(&record);
        epochs.push(record);
        if stopper.observe(epoch, val.total) {
            best = net.clone();
        }
        if stopper.should_stop() {
            stopped_early = true;
            break;
        }
    }

    best.params.zero_grads();
    let report = TrainReport {
        epochs,
        best_epoch: stopper.best_epoch,
        best_val_loss: stopper.best,
        stopped_early,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_arithmetic() {
        let cfg = TrainConfig {
            lr: 0.005,
            lr_factor: 0.8,
            lr_interval: 10,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(1), 0.005);
        assert_eq!(cfg.lr_at(10), 0.005);
        assert!((cfg.lr_at(11) - 0.004).abs() < 1e-18);
        assert!((cfg.lr_at(25) - 0.0032).abs() < 1e-15);
        assert_eq!(TrainConfig::default().lr_at(77), 0.001);
    }

    #[test]
    fn increasing_validation_stops_at_patience_plus_one() {
        let mut s = EarlyStopping::new(20);
        let mut stop = 0;
        for epoch in 1..=100 {
            s.observe(epoch, epoch as f64);
            if s.should_stop() {
                stop = epoch;
                break;
            }
        }
        assert_eq!(stop, 21);
        assert_eq!(s.best_epoch, 1);
    }

    #[test]
    fn tiny_improvements_do_not_count() {
        let mut s = EarlyStopping::new(2);
        assert!(s.observe(1, 1.0));
        assert!(!s.observe(2, 1.0 - 1e-13));
        assert!(s.observe(3, 0.5));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { lr_factor: 0.0, ..Default::default() },
            TrainConfig { lr_factor: 1.5, ..Default::default() },
            TrainConfig { patience: 200, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { lr: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
