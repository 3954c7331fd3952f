use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    /// Every mode divided by `sum_j max_k |T[j, k]|`.
    #[default]
    SumOfMaxima,
    /// Per-mode min-max map onto `[0, 1]`.
    Range,
}

/// Affine per-mode map `scaled = (raw - offset_j) / factor_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeScaler {
    pub kind: ScalerKind,
    pub offset: Vec<f64>,
    pub factor: Vec<f64>,
}

impl ModeScaler {
    /// Fits on an `N x K` block of temporal modes.
    pub fn fit(modes: &DMatrix<f64>, kind: ScalerKind) -> Result<Self> {
        let n = modes.nrows();
        if n == 0 || modes.ncols() == 0 {
            return Err(RomError::InvalidInput("cannot fit a mode scaler on an empty block".into()));
        }
        if modes.iter().any(|v| !v.is_finite()) {
            return Err(RomError::NonFinite("temporal modes".into()));
        }
        match kind {
            ScalerKind::SumOfMaxima => {
                let denom: f64 = modes.row_iter().map(|r| r.amax()).sum();
                if !(denom > 0.0) {
                    return Err(RomError::ZeroNorm(Some("temporal modes".into())));
                }
                Ok(ModeScaler {
                    kind,
                    offset: vec![0.0; n],
                    factor: vec![denom; n],
                })
            }
            ScalerKind::Range => {
                let mut offset = Vec::with_capacity(n);
                let mut factor = Vec::with_capacity(n);
                for (j, row) in modes.row_iter().enumerate() {
                    let (lo, hi) = (row.min(), row.max());
                    if !(hi > lo) {
                        return Err(RomError::ZeroRange { mode: j });
                    }
                    offset.push(lo);
                    factor.push(hi - lo);
                }
                Ok(ModeScaler { kind, offset, factor })
            }
        }
    }

    pub fn n_modes(&self) -> usize {
        self.factor.len()
    }

    /// The shared denominator of the sum-of-maxima scaler.
    pub fn denominator(&self) -> Option<f64> {
        (self.kind == ScalerKind::SumOfMaxima).then(|| self.factor[0])
    }

    fn check(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.n_modes() {
            return Err(RomError::mismatch("mode scaler rows", self.n_modes(), m.nrows()));
        }
        Ok(())
    }

    pub fn scale(&self, modes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(modes)?;
        Ok(DMatrix::from_fn(modes.nrows(), modes.ncols(), |j, k| {
            (modes[(j, k)] - self.offset[j]) / self.factor[j]
        }))
    }

    pub fn unscale(&self, scaled: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(scaled)?;
        Ok(DMatrix::from_fn(scaled.nrows(), scaled.ncols(), |j, k| {
            scaled[(j, k)] * self.factor[j] + self.offset[j]
        }))
    }
}
