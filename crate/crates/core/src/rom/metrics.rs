use crate::data::{center_scale, ScalingStats, SnapshotMatrix, SnapshotTensor};
use crate::error::{Result, RomError};

/// `||x~_pred - x~||_F / ||x~||_F` per variable, on centered and scaled fields.
pub fn rrmse_per_variable(truth: &SnapshotTensor, pred: &SnapshotTensor, stats: &ScalingStats) -> Result<Vec<f64>> {
    if truth.dims() != pred.dims() {
        return Err(RomError::mismatch(
            "rrmse tensors",
            format!("{:?}", truth.dims()),
            format!("{:?}", pred.dims()),
        ));
    }
    let t = center_scale(&truth.to_snapshot_matrix(), stats)?;
    let p = center_scale(&pred.to_snapshot_matrix(), stats)?;
    rrmse_per_variable_scaled(&t, &p, truth.var_names())
}

/// Per-variable RRMSE of two already centered and scaled matrices.
pub fn rrmse_per_variable_scaled(truth: &SnapshotMatrix, pred: &SnapshotMatrix, names: &[String]) -> Result<Vec<f64>> {
    let layout = truth.layout;
    (0..layout.n_vars)
        .map(|v| {
            let rows = layout.var_rows(v);
            let mut num = 0.0;
            let mut den = 0.0;
            for r in rows {
                for k in 0..truth.ncols() {
                    let t = truth.values[(r, k)];
                    let d = pred.values[(r, k)] - t;
                    num += d * d;
                    den += t * t;
                }
            }
            if den == 0.0 {
                return Err(RomError::ZeroNorm(names.get(v).cloned().or_else(|| Some(format!("#{v}")))));
            }
            Ok((num / den).sqrt())
        })
        .collect()
}

/// `|T_t - T*_t| / (max T - min T)` with the range taken over `truth`.
pub fn n_mse(truth: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    if truth.len() != pred.len() {
        return Err(RomError::mismatch("n-MSE rows", truth.len(), pred.len()));
    }
    let hi = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(RomError::ZeroRange { mode: 0 });
    }
    Ok(truth.iter().zip(pred).map(|(t, p)| (t - p).abs() / range).collect())
}
