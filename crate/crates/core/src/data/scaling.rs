use nalgebra::DMatrix;

use super::{Layout, SnapshotMatrix};
use crate::error::{Result, RomError};

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-12;

/// Centering and auto-scaling constants: a temporal mean per row and one
/// pooled population standard deviation per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingStats {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
    pub epsilon: f64,
    pub layout: Layout,
}

impl ScalingStats {
    pub fn new(mean: Vec<f64>, sigma: Vec<f64>, epsilon: f64, layout: Layout) -> Result<Self> {
        if mean.len() != layout.state_len() {
            return Err(RomError::mismatch("scaling mean", layout.state_len(), mean.len()));
        }
        if sigma.len() != layout.n_vars {
            return Err(RomError::mismatch("scaling sigma", layout.n_vars, sigma.len()));
        }
        if let Some((v, &s)) = sigma.iter().enumerate().find(|(_, &s)| !(s > epsilon)) {
            return Err(RomError::DegenerateVariable {
                name: format!("#{v}"),
                sigma: s,
                epsilon,
            });
        }
        Ok(ScalingStats {
            mean,
            sigma,
            epsilon,
            layout,
        })
    }
}

/// `var_names` only labels degenerate-variable errors; pass `&[]` to use indices.
pub fn compute_scaling_stats(
    x: &SnapshotMatrix,
    var_names: &[String],
    epsilon: f64,
) -> Result<ScalingStats> {
    let k = x.ncols();
    if k < 2 {
        return Err(RomError::InvalidInput(format!(
            "need at least 2 snapshots for scaling statistics, got {k}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(RomError::InvalidInput(format!("sigma floor must be positive, got {epsilon}")));
    }
    let layout = x.layout;
    let mean: Vec<f64> = x
        .values
        .row_iter()
        .map(|row| row.iter().sum::<f64>() / k as f64)
        .collect();

    let g = layout.grid_points();
    let mut sigma = Vec::with_capacity(layout.n_vars);
    for v in 0..layout.n_vars {
        let mut ss = 0.0;
        for row in layout.var_rows(v) {
            let m = mean[row];
            for col in 0..k {
                let d = x.values[(row, col)] - m;
                ss += d * d;
            }
        }
        let s = (ss / (g * k) as f64).sqrt();
        if !(s > epsilon) {
            return Err(RomError::DegenerateVariable {
                name: var_names
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| format!("#{v}")),
                sigma: s,
                epsilon,
            });
        }
        sigma.push(s);
    }
    Ok(ScalingStats {
        mean,
        sigma,
        epsilon,
        layout,
    })
}

fn check_layout(x: &SnapshotMatrix, stats: &ScalingStats) -> Result<()> {
    if x.layout != stats.layout {
        return Err(RomError::mismatch(
            "scaling layout",
            format!("{:?}", stats.layout),
            format!("{:?}", x.layout),
        ));
    }
    Ok(())
}

/// `x~[j, k] = (x[j, k] - mean[j]) / sigma[var(j)]`
pub fn center_scale(x: &SnapshotMatrix, stats: &ScalingStats) -> Result<SnapshotMatrix> {
    check_layout(x, stats)?;
    let layout = x.layout;
    let values = DMatrix::from_fn(x.nrows(), x.ncols(), |j, k| {
        (x.values[(j, k)] - stats.mean[j]) / stats.sigma[layout.var_of_row(j)]
    });
    Ok(SnapshotMatrix { values, layout })
}

pub fn inverse_center_scale(x: &SnapshotMatrix, stats: &ScalingStats) -> Result<SnapshotMatrix> {
    check_layout(x, stats)?;
    let layout = x.layout;
    let values = DMatrix::from_fn(x.nrows(), x.ncols(), |j, k| {
        x.values[(j, k)] * stats.sigma[layout.var_of_row(j)] + stats.mean[j]
    });
    Ok(SnapshotMatrix { values, layout })
}
