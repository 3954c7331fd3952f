use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};
use crate::neuralnet::Network;

/// Anything that maps a `q x N` window to `p x N` future snapshots.
pub trait Forecaster {
    fn window(&self) -> usize;
    fn horizon(&self) -> usize;
    fn n_modes(&self) -> usize;
    fn predict(&self, window: &[f64]) -> Result<Vec<f64>>;
}

impl Forecaster for Network {
    fn window(&self) -> usize {
        self.spec.window
    }

    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn n_modes(&self) -> usize {
        self.spec.n_modes
    }

    fn predict(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.forward(window)
    }
}

/// How far the input window advances after each forward call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stride {
    /// Keep all `p` predicted steps.
    #[default]
    Horizon,
    /// Keep only the first predicted step.
    One,
}

/// Autoregressive extrapolation from a `q x N` seed window (row-major). Every
/// input past the seed is an earlier prediction. Returns `N x steps`.
pub fn rollout<F: Forecaster + ?Sized>(
    model: &F,
    seed: &[f64],
    steps: usize,
    stride: Stride,
) -> Result<DMatrix<f64>> {
    let (q, p, n) = (model.window(), model.horizon(), model.n_modes());
    if steps == 0 {
        return Err(RomError::InvalidInput("rollout needs at least one step".into()));
    }
    if seed.len() != q * n {
        return Err(RomError::mismatch("seed window", q * n, seed.len()));
    }
    let keep = match stride {
        Stride::Horizon => p,
        Stride::One => 1,
    };
    // history holds the seed followed by every kept prediction, row-major
    let mut history = seed.to_vec();
    history.reserve(steps * n);
    let mut produced = 0;
    while produced < steps {
        let start = history.len() - q * n;
        let out = model.predict(&history[start..])?;
        if out.len() != p * n {
            return Err(RomError::mismatch("forecast output", p * n, out.len()));
        }
        let take = keep.min(steps - produced);
        let rows = &out[..take * n];
        if let Some(i) = rows.iter().position(|v| !v.is_finite()) {
            return Err(RomError::NonFinite(format!("rollout step {}", produced + i / n)));
        }
        history.extend_from_slice(rows);
        produced += take;
    }
    let tail = &history[q * n..];
    Ok(DMatrix::from_fn(n, steps, |j, k| tail[k * n + j]))
}

/// Open-loop forecast of columns `start..start + steps` of an `N x K` series:
/// every forward call reads the true `q` snapshots before its block and its
/// `p` outputs are kept. Returns `N x steps`.
pub fn teacher_forced<F: Forecaster + ?Sized>(
    model: &F,
    series: &DMatrix<f64>,
    start: usize,
    steps: usize,
) -> Result<DMatrix<f64>> {
    let (q, p, n) = (model.window(), model.horizon(), model.n_modes());
    if steps == 0 {
        return Err(RomError::InvalidInput("forecast needs at least one step".into()));
    }
    if series.nrows() != n {
        return Err(RomError::mismatch("series rows", n, series.nrows()));
    }
    if start < q || start + steps > series.ncols() {
        return Err(RomError::InvalidInput(format!(
            "forecast range {start}..{} needs {q} prior snapshots inside 0..{}",
            start + steps,
            series.ncols()
        )));
    }
    let mut out = DMatrix::zeros(n, steps);
    let mut k = 0;
    while k < steps {
        let t0 = start + k;
        let pred = model.predict(&super::split::rows_of(series, t0 - q..t0))?;
        if pred.len() != p * n {
            return Err(RomError::mismatch("forecast output", p * n, pred.len()));
        }
        let take = p.min(steps - k);
        for r in 0..take {
            for j in 0..n {
                let v = pred[r * n + j];
                if !v.is_finite() {
                    return Err(RomError::NonFinite(format!("forecast step {}", k + r)));
                }
                out[(j, k + r)] = v;
            }
        }
        k += take;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;

    /// Repeats the last input row `p` times and counts calls.
    struct Repeat {
        q: usize,
        p: usize,
        n: usize,
        calls: Cell<usize>,
    }

    impl Forecaster for Repeat {
        fn window(&self) -> usize {
            self.q
        }
        fn horizon(&self) -> usize {
            self.p
        }
        fn n_modes(&self) -> usize {
            self.n
        }
        fn predict(&self, w: &[f64]) -> Result<Vec<f64>> {
            self.calls.set(self.calls.get() + 1);
            let last = &w[w.len() - self.n..];
            Ok(last.repeat(self.p))
        }
    }

    fn repeat(q: usize, p: usize, n: usize) -> Repeat {
        Repeat { q, p, n, calls: Cell::new(0) }
    }

    #[test]
    fn call_counts() {
        let m = repeat(10, 6, 2);
        let seed: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let out = rollout(&m, &seed, 6, Stride::Horizon).unwrap();
        assert_eq!(m.calls.get(), 1);
        assert_eq!(out.ncols(), 6);

        let m = repeat(10, 6, 2);
        let out = rollout(&m, &seed, 199, Stride::Horizon).unwrap();
        assert_eq!(m.calls.get(), 34);
        assert_eq!(out.ncols(), 199);

        let m = repeat(10, 6, 2);
        rollout(&m, &seed, 17, Stride::One).unwrap();
        assert_eq!(m.calls.get(), 17);
    }

    #[test]
    fn teacher_forcing_reads_truth() {
        let m = repeat(2, 3, 1);
        let series = DMatrix::from_fn(1, 12, |_, k| k as f64);
        let out = teacher_forced(&m, &series, 2, 7).unwrap();
        // each block repeats the last true snapshot before it
        assert_eq!(out.iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 1.0, 4.0, 4.0, 4.0, 7.0]);
        assert_eq!(m.calls.get(), 3);
        assert!(teacher_forced(&m, &series, 1, 3).is_err());
        assert!(teacher_forced(&m, &series, 2, 11).is_err());
    }

    #[test]
    fn identity_model_continues_constant() {
        let m = repeat(3, 2, 2);
        let out = rollout(&m, &[0.0, 0.0, 1.0, 1.0, 5.0, -2.0], 9, Stride::Horizon).unwrap();
        for k in 0..9 {
            assert_eq!((out[(0, k)], out[(1, k)]), (5.0, -2.0));
        }
        assert!(rollout(&m, &[0.0; 5], 3, Stride::Horizon).is_err());
        assert!(rollout(&m, &[0.0; 6], 0, Stride::Horizon).is_err());
    }
}
