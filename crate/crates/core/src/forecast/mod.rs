//! Temporal-mode scaling, time splits and windows, training and rollout.

mod presets;
mod rollout;
mod scaler;
mod split;
mod train;

pub use presets::{CasePreset, Presets};
pub use rollout::{rollout, teacher_forced, Forecaster, Stride};
pub use scaler::{ModeScaler, ScalerKind};
pub use split::{
    make_windows, split_sequential, windows_with_targets_in, SplitPlan, Windows, DEFAULT_TEST_FRACTION,
    DEFAULT_TRAIN_FRACTION,
};
pub(crate) use split::rows_of;
pub use train::{
    train, train_with, EarlyStopping, EpochRecord, LossKind, TrainConfig, TrainReport, IMPROVEMENT_EPS,
};
