use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.85;

/// Contiguous train / validation / test blocks in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl SplitPlan {
    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }

    pub fn train(&self) -> Range<usize> {
        0..self.n_train
    }

    pub fn val(&self) -> Range<usize> {
        self.n_train..self.n_train + self.n_val
    }

    pub fn test(&self) -> Range<usize> {
        self.n_train + self.n_val..self.total()
    }

    /// Train and validation together: the span the reduced basis is fitted on.
    pub fn fit_range(&self) -> Range<usize> {
        0..self.n_train + self.n_val
    }
}

/// `n_test = floor(test_frac * n_t)`, `n_train = round(train_frac * rest)`.
/// Every block must hold at least `min_len` snapshots.
pub fn split_sequential(n_t: usize, test_frac: f64, train_frac: f64, min_len: usize) -> Result<SplitPlan> {
    for (name, f) in [("test fraction", test_frac), ("train fraction", train_frac)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(RomError::InvalidInput(format!("{name} must lie in (0, 1), got {f}")));
        }
    }
    let n_test = (test_frac * n_t as f64).floor() as usize;
    let rest = n_t - n_test;
    let n_train = (train_frac * rest as f64).round() as usize;
    let plan = SplitPlan {
        n_train,
        n_val: rest - n_train,
        n_test,
    };
    for (name, len) in [("train", plan.n_train), ("validation", plan.n_val), ("test", plan.n_test)] {
        if len < min_len {
            return Err(RomError::SplitTooSmall(format!(
                "{name} block of {len} snapshots (n_t = {n_t}) is shorter than q + p = {min_len}"
            )));
        }
    }
    Ok(plan)
}

/// Input/target pairs cut from a mode series; each row-major, one snapshot
/// per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Windows {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Column index of each window's first input snapshot.
    pub starts: Vec<usize>,
}

impl Windows {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn pairs(&self) -> Vec<(&[f64], &[f64])> {
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(i, t)| (i.as_slice(), t.as_slice()))
            .collect()
    }
}

/// Row-major copy of columns `cols` of an `N x K` series.
pub(crate) fn rows_of(series: &DMatrix<f64>, cols: Range<usize>) -> Vec<f64> {
    let mut out = Vec::with_capacity(cols.len() * series.nrows());
    for k in cols {
        out.extend(series.column(k).iter());
    }
    out
}

/// Stride-1 windows over all `K` columns: `K - q - p + 1` pairs.
pub fn make_windows(series: &DMatrix<f64>, q: usize, p: usize) -> Result<Windows> {
    windows_with_targets_in(series, q, p, 0..series.ncols())
}

/// Windows whose `p` targets all fall inside `targets`. Inputs may reach back
/// before `targets.start` (never before column 0).
pub fn windows_with_targets_in(
    series: &DMatrix<f64>,
    q: usize,
    p: usize,
    targets: Range<usize>,
) -> Result<Windows> {
    if q == 0 || p == 0 {
        return Err(RomError::InvalidInput("window and horizon must be >= 1".into()));
    }
    if targets.end > series.ncols() {
        return Err(RomError::mismatch("window range end", series.ncols(), targets.end));
    }
    let first = targets.start.max(q);
    if targets.end < first + p {
        return Err(RomError::SplitTooSmall(format!(
            "range {targets:?} fits no window with q = {q}, p = {p}"
        )));
    }
    let mut w = Windows::default();
    for t0 in first..=targets.end - p {
        let s = t0 - q;
        w.inputs.push(rows_of(series, s..t0));
        w.targets.push(rows_of(series, t0..t0 + p));
        w.starts.push(s);
    }
    Ok(w)
}
