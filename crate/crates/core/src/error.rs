use std::fmt;

use thiserror::Error;

/// Broad failure classes, used by front ends to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
    Input,
}

#[derive(Debug, Error)]
pub enum RomError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("variable `{name}` is degenerate (sigma = {sigma:e} <= {epsilon:e})")]
    DegenerateVariable {
        name: String,
        sigma: f64,
        epsilon: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("split too small: {0}")]
    SplitTooSmall(String),

    #[error("mode {mode} has zero range")]
    ZeroRange { mode: usize },

    #[error("reference has zero norm{}", .0.as_ref().map(|v| format!(" (variable `{v}`)")).unwrap_or_default())]
    ZeroNorm(Option<String>),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("mode-count mismatch: network expects {expected} modes, dataset provides {available}")]
    ModeCountMismatch { expected: usize, available: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<RomError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pipeline stage labels attached to propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Split,
    Preprocess,
    Pod,
    Scaling,
    Windowing,
    Training,
    Rollout,
    Reconstruction,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Split => "split",
            Stage::Preprocess => "preprocess",
            Stage::Pod => "pod",
            Stage::Scaling => "mode scaling",
            Stage::Windowing => "windowing",
            Stage::Training => "training",
            Stage::Rollout => "rollout",
            Stage::Reconstruction => "reconstruction",
            Stage::Metrics => "metrics",
        };
        f.write_str(s)
    }
}

impl RomError {
    pub fn class(&self) -> ErrorClass {
        match self {
            RomError::Stage { source, .. } => source.class(),
            RomError::Config(_) => ErrorClass::Config,
            RomError::Io(_) | RomError::Format(_) | RomError::Corrupt(_) => ErrorClass::Io,
            RomError::NonFinite(_)
            | RomError::Diverged { .. }
            | RomError::DegenerateVariable { .. }
            | RomError::ZeroRange { .. }
            | RomError::ZeroNorm(_) => ErrorClass::Numeric,
            RomError::InvalidInput(_)
            | RomError::DimensionMismatch { .. }
            | RomError::SplitTooSmall(_)
            | RomError::ModeCountMismatch { .. } => ErrorClass::Input,
        }
    }

    /// Strips stage wrappers.
    pub fn root(&self) -> &RomError {
        match self {
            RomError::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn mismatch(
        context: &'static str,
        expected: impl fmt::Display,
        found: impl fmt::Display,
    ) -> Self {
        RomError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, RomError>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| RomError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
