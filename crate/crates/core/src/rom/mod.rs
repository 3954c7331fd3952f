//! End-to-end reduced-order model: preprocessing, POD, mode scaling,
//! training, rollout, reconstruction and evaluation.

mod config;
mod metrics;
mod report;
mod store;

pub use config::{ModelConfig, PodConfig, RolloutConfig, RomConfig, SplitConfig};
pub use metrics::{n_mse, rrmse_per_variable, rrmse_per_variable_scaled};
pub use report::EvalReport;
pub use store::{decode_state, encode_state, PIPELINE_FILES, STATE_MAGIC};

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{center_scale, compute_scaling_stats, inverse_center_scale, ScalingStats, SnapshotMatrix, SnapshotTensor};
use crate::error::{Result, RomError, Stage, StageExt};
use crate::forecast::{
    rollout, rows_of, split_sequential, teacher_forced, train_with, windows_with_targets_in, EpochRecord, Forecaster, LossKind,
    ModeScaler, SplitPlan, Stride, TrainReport,
};
use crate::neuralnet::{LossSpec, MassBalance, Network};
use crate::pod::{compute_pod, project, rrmse, truncate, PodBasis, TemporalModes, Truncation};

/// Where the preprocessing constants and the basis come from.
#[derive(Debug, Clone)]
pub enum PodSource {
    /// Fit on the train and validation snapshots.
    Compute,
    /// Reuse constants and a basis fitted earlier; the basis is truncated
    /// further per the config.
    Precomputed { stats: ScalingStats, basis: PodBasis },
}

/// A trained reduced-order model.
#[derive(Debug, Clone, PartialEq)]
pub struct RomPipeline {
    pub stats: ScalingStats,
    /// Truncated basis, `J x N`.
    pub basis: PodBasis,
    pub scaler: ModeScaler,
    pub network: Network,
    pub split: SplitPlan,
    pub stride: Stride,
    pub dt: f64,
    pub var_names: Vec<String>,
    pub is_species: Vec<bool>,
    /// Scaled modes of the last `q` fitted snapshots, row-major: the default
    /// rollout seed for forecasting the test range.
    pub seed_window: Vec<f64>,
}

/// Preprocessing and POD of a dataset's fitting range.
pub struct Reduced {
    pub split: SplitPlan,
    pub stats: ScalingStats,
    pub basis: PodBasis,
    /// Unscaled coefficients `U^T x~` of every snapshot, `N x n_t`.
    pub modes: DMatrix<f64>,
}

/// Splits `tensor`, fits centering/scaling and the truncated basis on the
/// train and validation snapshots, and projects every snapshot.
pub fn reduce(tensor: &SnapshotTensor, cfg: &RomConfig, source: PodSource) -> Result<Reduced> {
    cfg.validate()?;
    let (q, p) = (cfg.model.window, cfg.model.horizon);
    let split = split_sequential(tensor.n_t(), cfg.split.test_fraction, cfg.split.train_fraction, q + p)
        .stage(Stage::Split)?;
    let x = tensor.to_snapshot_matrix();
    let criterion = cfg.pod.truncation()?;
    let (stats, basis) = match source {
        PodSource::Compute => {
            let fit = x.columns(split.fit_range());
            let stats = compute_scaling_stats(&fit, tensor.var_names(), cfg.pod.sigma_floor).stage(Stage::Preprocess)?;
            let xs = center_scale(&fit, &stats).stage(Stage::Preprocess)?;
            let (basis, modes) = compute_pod(&xs).stage(Stage::Pod)?;
            let (basis, _) = truncate(&basis, &modes, criterion, cfg.pod.metric).stage(Stage::Pod)?;
            (stats, basis)
        }
        PodSource::Precomputed { stats, basis } => {
            if stats.layout != tensor.layout() || basis.layout != tensor.layout() {
                return Err(RomError::mismatch(
                    "precomputed basis layout",
                    format!("{:?}", tensor.layout()),
                    format!("{:?}", basis.layout),
                ))
                .stage(Stage::Pod);
            }
            let placeholder = TemporalModes {
                values: DMatrix::zeros(basis.n_modes(), 1),
            };
            let criterion = match criterion {
                // an unset criterion keeps the stored basis as is
                Truncation::EnergyTarget(e) if e >= 1.0 => Truncation::ModeCount(basis.n_modes()),
                c => c,
            };
            let (basis, _) = truncate(&basis, &placeholder, criterion, cfg.pod.metric).stage(Stage::Pod)?;
            (stats, basis)
        }
    };
    let xs = center_scale(&x, &stats).stage(Stage::Preprocess)?;
    let modes = project(&basis, &xs).stage(Stage::Pod)?.values;
    Ok(Reduced {
        split,
        stats,
        basis,
        modes,
    })
}

/// Runs the full fitting flow and trains the forecaster.
pub fn fit_pipeline(tensor: &SnapshotTensor, cfg: &RomConfig) -> Result<(RomPipeline, TrainReport)> {
    fit_pipeline_with(tensor, cfg, PodSource::Compute, |_| {})
}

pub fn fit_pipeline_with(
    tensor: &SnapshotTensor,
    cfg: &RomConfig,
    source: PodSource,
    progress: impl FnMut(&EpochRecord),
) -> Result<(RomPipeline, TrainReport)> {
    let reduced = reduce(tensor, cfg, source)?;
    fit_reduced(tensor, cfg, reduced, progress)
}

/// Trains on an already reduced dataset.
pub fn fit_reduced(
    tensor: &SnapshotTensor,
    cfg: &RomConfig,
    reduced: Reduced,
    progress: impl FnMut(&EpochRecord),
) -> Result<(RomPipeline, TrainReport)> {
    let Reduced {
        split,
        stats,
        basis,
        modes,
    } = reduced;
    let (q, p) = (cfg.model.window, cfg.model.horizon);
    let n = basis.n_modes();

    let train_modes = modes.columns(0, split.n_train).into_owned();
    let scaler = ModeScaler::fit(&train_modes, cfg.train.scaling).stage(Stage::Scaling)?;
    let fit = split.fit_range();
    let scaled = scaler.scale(&modes.columns(0, fit.end).into_owned()).stage(Stage::Scaling)?;

    let train_w = windows_with_targets_in(&scaled, q, p, split.train()).stage(Stage::Windowing)?;
    let val_w = windows_with_targets_in(&scaled, q, p, split.val()).stage(Stage::Windowing)?;

    let loss = match cfg.train.loss {
        LossKind::Mse => LossSpec::Mse,
        LossKind::PaMse => LossSpec::PaMse(
            MassBalance::from_basis(
                &basis.modes,
                basis.layout,
                tensor.is_species(),
                &stats.sigma,
                &scaler.factor,
                cfg.train.pa_weight,
            )
            .stage(Stage::Training)?,
        ),
    };
    let spec = cfg.model.spec(n);
    let (network, report) =
        train_with(spec, &cfg.train, &train_w, &val_w, &loss, progress).stage(Stage::Training)?;

    let seed_window = rows_of(&scaled, fit.end - q..fit.end);
    Ok((
        RomPipeline {
            stats,
            basis,
            scaler,
            network,
            split,
            stride: cfg.rollout.stride,
            dt: tensor.dt(),
            var_names: tensor.var_names().to_vec(),
            is_species: tensor.is_species().to_vec(),
            seed_window,
        },
        report,
    ))
}

impl RomPipeline {
    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    /// Unscaled coefficients `U^T x~` of every snapshot of `tensor`.
    pub fn project_tensor(&self, tensor: &SnapshotTensor) -> Result<DMatrix<f64>> {
        let xs = center_scale(&tensor.to_snapshot_matrix(), &self.stats).stage(Stage::Preprocess)?;
        Ok(project(&self.basis, &xs).stage(Stage::Pod)?.values)
    }

    /// Scaled modes `N x K*` back to physical snapshots.
    pub fn reconstruct_tensor(&self, scaled: &DMatrix<f64>) -> Result<SnapshotTensor> {
        let modes = self.scaler.unscale(scaled).stage(Stage::Reconstruction)?;
        let x = SnapshotMatrix::new(&self.basis.modes * modes, self.basis.layout).stage(Stage::Reconstruction)?;
        let x = inverse_center_scale(&x, &self.stats).stage(Stage::Reconstruction)?;
        SnapshotTensor::from_snapshot_matrix(&x, self.dt, self.var_names.clone(), self.is_species.clone())
            .stage(Stage::Reconstruction)
    }

    fn forecast<F: Forecaster + ?Sized>(&self, model: &F, seed: &[f64], steps: usize) -> Result<DMatrix<f64>> {
        if model.n_modes() != self.n_modes() {
            return Err(RomError::ModeCountMismatch {
                expected: model.n_modes(),
                available: self.n_modes(),
            });
        }
        rollout(model, seed, steps, self.stride).stage(Stage::Rollout)
    }

    /// Forecasts `steps` snapshots past the fitted range.
    pub fn predict_snapshots(&self, steps: usize) -> Result<SnapshotTensor> {
        self.predict_with(&self.network, steps)
    }

    pub fn predict_with<F: Forecaster + ?Sized>(&self, model: &F, steps: usize) -> Result<SnapshotTensor> {
        let scaled = self.forecast(model, &self.seed_window, steps)?;
        self.reconstruct_tensor(&scaled)
    }

    /// Forecasts the test range of `truth` (the full dataset the pipeline
    /// was fitted on) and scores it.
    pub fn evaluate(&self, truth: &SnapshotTensor) -> Result<EvalReport> {
        self.evaluate_with(&self.network, truth)
    }

    pub fn evaluate_with<F: Forecaster + ?Sized>(&self, model: &F, truth: &SnapshotTensor) -> Result<EvalReport> {
        if truth.n_t() != self.split.total() {
            return Err(RomError::mismatch("truth snapshot count", self.split.total(), truth.n_t()));
        }
        self.evaluate_range(model, truth, &self.seed_window, self.split.test()).map(|(r, _)| r)
    }

    /// Forecasts `steps` snapshots past the fitted range and scores them
    /// against the same snapshots of `truth`. Returns the prediction too.
    pub fn evaluate_steps(&self, truth: &SnapshotTensor, steps: usize) -> Result<(EvalReport, SnapshotTensor)> {
        let start = self.split.fit_range().end;
        if truth.n_t() < start + steps {
            return Err(RomError::mismatch("truth snapshot count", start + steps, truth.n_t()));
        }
        self.evaluate_range(&self.network, truth, &self.seed_window, start..start + steps)
    }

    /// Rolls out from `seed` over `range` of `truth` and scores the result.
    fn evaluate_range<F: Forecaster + ?Sized>(
        &self,
        model: &F,
        truth: &SnapshotTensor,
        seed: &[f64],
        range: Range<usize>,
    ) -> Result<(EvalReport, SnapshotTensor)> {
        self.check_truth(truth)?;
        let scaled = self.forecast(model, seed, range.len())?;
        self.score(&scaled, truth, range)
    }

    fn check_truth(&self, truth: &SnapshotTensor) -> Result<()> {
        if truth.layout() != self.basis.layout {
            return Err(RomError::mismatch(
                "truth layout",
                format!("{:?}", self.basis.layout),
                format!("{:?}", truth.layout()),
            ));
        }
        Ok(())
    }

    /// Scores scaled predicted modes against snapshots `range` of `truth`.
    fn score(
        &self,
        scaled: &DMatrix<f64>,
        truth: &SnapshotTensor,
        range: Range<usize>,
    ) -> Result<(EvalReport, SnapshotTensor)> {
        let pred = self.reconstruct_tensor(scaled)?;
        let truth_part = truth.time_slice(range.clone()).stage(Stage::Metrics)?;

        let xt = center_scale(&truth_part.to_snapshot_matrix(), &self.stats).stage(Stage::Metrics)?;
        let xp = center_scale(&pred.to_snapshot_matrix(), &self.stats).stage(Stage::Metrics)?;
        let t_true = project(&self.basis, &xt).stage(Stage::Metrics)?.values;
        let floor_x = SnapshotMatrix::new(&self.basis.modes * &t_true, xt.layout).stage(Stage::Metrics)?;

        let names = &self.var_names;
        let rrmse_v = rrmse_per_variable_scaled(&xt, &xp, names).stage(Stage::Metrics)?;
        let floor_v = rrmse_per_variable_scaled(&xt, &floor_x, names).stage(Stage::Metrics)?;
        let global = rrmse(&xt.values, &xp.values).stage(Stage::Metrics)?;
        let global_floor = rrmse(&xt.values, &floor_x.values).stage(Stage::Metrics)?;

        let t_pred = self.scaler.unscale(scaled).stage(Stage::Metrics)?;
        let mut nmse = DMatrix::zeros(self.n_modes(), range.len());
        for j in 0..self.n_modes() {
            let tr: Vec<f64> = t_true.row(j).iter().copied().collect();
            let pr: Vec<f64> = t_pred.row(j).iter().copied().collect();
            let e = n_mse(&tr, &pr)
                .map_err(|e| match e {
                    RomError::ZeroRange { .. } => RomError::ZeroRange { mode: j },
                    other => other,
                })
                .stage(Stage::Metrics)?;
            for (k, v) in e.into_iter().enumerate() {
                nmse[(j, k)] = v;
            }
        }

        let report = EvalReport {
            var_names: names.clone(),
            start: range.start,
            rrmse: rrmse_v,
            pod_floor: floor_v,
            global_rrmse: global,
            global_pod_floor: global_floor,
            nmse,
            mass_balance: pred.mass_balance_deviation(),
            truth_mass_balance: truth_part.mass_balance_deviation(),
        };
        Ok((report, pred))
    }
}

/// How the transferred network is driven over the new dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Autoregressive from the first `q` snapshots.
    #[default]
    Rollout,
    /// Every forward call reads true snapshots.
    TeacherForced,
}

/// Scores a trained network on a different dataset without retraining.
///
/// Preprocessing, POD and mode scaling are refitted on the whole new dataset
/// and truncated to the network's mode count. The first `q` snapshots seed
/// the rollout, which then covers every remaining snapshot.
pub fn transfer_evaluate(pipeline: &RomPipeline, new: &SnapshotTensor) -> Result<EvalReport> {
    transfer_with_prediction(pipeline, new, TransferMode::Rollout).map(|(r, _)| r)
}

/// As [`transfer_evaluate`] with a choice of driving mode, also returning the
/// predicted snapshots.
pub fn transfer_with_prediction(
    pipeline: &RomPipeline,
    new: &SnapshotTensor,
    mode: TransferMode,
) -> Result<(EvalReport, SnapshotTensor)> {
    let q = pipeline.network.spec.window;
    let n = pipeline.n_modes();
    if new.n_t() <= q {
        return Err(RomError::SplitTooSmall(format!(
            "transfer dataset has {} snapshots, needs more than q = {q}",
            new.n_t()
        )));
    }
    let x = new.to_snapshot_matrix();
    let stats = compute_scaling_stats(&x, new.var_names(), pipeline.stats.epsilon).stage(Stage::Preprocess)?;
    let xs = center_scale(&x, &stats).stage(Stage::Preprocess)?;
    let (basis, modes) = compute_pod(&xs).stage(Stage::Pod)?;
    if basis.n_modes() < n {
        return Err(RomError::ModeCountMismatch {
            expected: n,
            available: basis.n_modes(),
        });
    }
    let (basis, modes) =
        truncate(&basis, &modes, Truncation::ModeCount(n), Default::default()).stage(Stage::Pod)?;
    let scaler = ModeScaler::fit(&modes.values, pipeline.scaler.kind).stage(Stage::Scaling)?;
    let scaled = scaler.scale(&modes.values).stage(Stage::Scaling)?;
    let seed = rows_of(&scaled, 0..q);
    let target = RomPipeline {
        stats,
        basis,
        scaler,
        network: pipeline.network.clone(),
        split: SplitPlan {
            n_train: q,
            n_val: 0,
            n_test: new.n_t() - q,
        },
        stride: pipeline.stride,
        dt: new.dt(),
        var_names: new.var_names().to_vec(),
        is_species: new.is_species().to_vec(),
        seed_window: seed.clone(),
    };
    let range = q..new.n_t();
    match mode {
        TransferMode::Rollout => target.evaluate_range(&pipeline.network, new, &seed, range),
        TransferMode::TeacherForced => {
            let forced = teacher_forced(&pipeline.network, &scaled, q, range.len()).stage(Stage::Rollout)?;
            target.score(&forced, new, range)
        }
    }
}
