use nalgebra::DMatrix;

use crate::data::Layout;
use crate::error::{Result, RomError};

/// Loss components averaged over target snapshots.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossValue {
    pub total: f64,
    /// Mode-space MSE term.
    pub mse: f64,
    /// Mass-balance term before weighting; zero for plain MSE.
    pub mass: f64,
}

impl LossValue {
    pub(crate) fn accumulate(&mut self, other: &LossValue, scale: f64) {
        self.total += scale * other.total;
        self.mse += scale * other.mse;
        self.mass += scale * other.mass;
    }
}

/// Linear map from a (scaled) mode-space error to the error of the summed
/// species mass fractions at every grid point.
///
/// Temporal means cancel in a difference, so
/// `sum_s dY_s(g) = sum_s sigma_s sum_n U[row(s, g), n] * scale_n * d_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassBalance {
    /// `G x N`
    pub species_sum: DMatrix<f64>,
    /// `species_sum^T species_sum`, `N x N`.
    gram: DMatrix<f64>,
    pub weight: f64,
}

impl MassBalance {
    pub fn new(species_sum: DMatrix<f64>, weight: f64) -> Result<Self> {
        if species_sum.nrows() == 0 || species_sum.ncols() == 0 {
            return Err(RomError::InvalidInput(
                "mass-balance loss needs at least one species row".into(),
            ));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(RomError::InvalidInput(format!("mass-balance weight {weight}")));
        }
        let gram = species_sum.tr_mul(&species_sum);
        Ok(MassBalance {
            species_sum,
            gram,
            weight,
        })
    }

    /// Builds the map from a spatial basis `U` (`J x N`), the per-variable
    /// scaling sigmas and the per-mode factors that undo the mode scaling.
    pub fn from_basis(
        modes: &DMatrix<f64>,
        layout: Layout,
        is_species: &[bool],
        sigma: &[f64],
        mode_scale: &[f64],
        weight: f64,
    ) -> Result<Self> {
        let n = modes.ncols();
        if modes.nrows() != layout.state_len() {
            return Err(RomError::mismatch("basis rows", layout.state_len(), modes.nrows()));
        }
        if is_species.len() != layout.n_vars || sigma.len() != layout.n_vars {
            return Err(RomError::mismatch("variable metadata", layout.n_vars, is_species.len()));
        }
        if mode_scale.len() != n {
            return Err(RomError::mismatch("mode scale", n, mode_scale.len()));
        }
        if !is_species.iter().any(|&s| s) {
            return Err(RomError::InvalidInput(
                "mass-balance loss needs at least one species variable".into(),
            ));
        }
        let g = layout.grid_points();
        let mut m = DMatrix::zeros(g, n);
        for v in (0..layout.n_vars).filter(|&v| is_species[v]) {
            for p in 0..g {
                let row = v * g + p;
                for c in 0..n {
                    m[(p, c)] += sigma[v] * modes[(row, c)];
                }
            }
        }
        for c in 0..n {
            let mut col = m.column_mut(c);
            col *= mode_scale[c];
        }
        MassBalance::new(m, weight)
    }

    pub fn n_modes(&self) -> usize {
        self.gram.nrows()
    }

    /// `||M d||^2`, summed row by row so it is never negative.
    fn quad(&self, d: &[f64]) -> f64 {
        let m = &self.species_sum;
        let mut s = 0.0;
        for g in 0..m.nrows() {
            let mut row = 0.0;
            for (j, &dj) in d.iter().enumerate() {
                row += m[(g, j)] * dj;
            }
            s += row * row;
        }
        s
    }

    fn grad_into(&self, d: &[f64], factor: f64, out: &mut [f64]) {
        let n = d.len();
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.gram[(i, j)] * d[j];
            }
            out[i] += factor * 2.0 * row;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum LossSpec {
    #[default]
    Mse,
    PaMse(MassBalance),
}

impl LossSpec {
    pub fn value(&self, pred: &[f64], target: &[f64], n: usize) -> Result<LossValue> {
        check(pred, target, n)?;
        if let LossSpec::PaMse(mb) = self {
            if mb.n_modes() != n {
                return Err(RomError::mismatch("mass-balance modes", mb.n_modes(), n));
            }
        }
        let steps = pred.len() / n;
        let mut mse = 0.0;
        let mut mass = 0.0;
        let mut diff = vec![0.0; n];
        for k in 0..steps {
            for j in 0..n {
                diff[j] = pred[k * n + j] - target[k * n + j];
            }
            mse += diff.iter().map(|d| d * d).sum::<f64>() / n as f64;
            if let LossSpec::PaMse(mb) = self {
                mass += mb.quad(&diff);
            }
        }
        mse /= steps as f64;
        mass /= steps as f64;
        let weight = match self {
            LossSpec::Mse => 0.0,
            LossSpec::PaMse(mb) => mb.weight,
        };
        Ok(LossValue {
            total: mse + weight * mass,
            mse,
            mass,
        })
    }

    /// Loss and its gradient with respect to `pred`.
    pub fn value_and_grad(&self, pred: &[f64], target: &[f64], n: usize) -> Result<(LossValue, Vec<f64>)> {
        let value = self.value(pred, target, n)?;
        let steps = pred.len() / n;
        let inv = 1.0 / steps as f64;
        let mut grad: Vec<f64> = pred
            .iter()
            .zip(target)
            .map(|(p, t)| inv * 2.0 * (p - t) / n as f64)
            .collect();
        if let LossSpec::PaMse(mb) = self {
            let mut diff = vec![0.0; n];
            for k in 0..steps {
                for j in 0..n {
                    diff[j] = pred[k * n + j] - target[k * n + j];
                }
                mb.grad_into(&diff, inv * mb.weight, &mut grad[k * n..(k + 1) * n]);
            }
        }
        Ok((value, grad))
    }
}

fn check(pred: &[f64], target: &[f64], n: usize) -> Result<()> {
    if pred.is_empty() || n == 0 {
        return Err(RomError::InvalidInput("empty loss batch".into()));
    }
    if pred.len() != target.len() || !pred.len().is_multiple_of(n) {
        return Err(RomError::mismatch("loss operands", pred.len(), target.len()));
    }
    Ok(())
}

/// `(1/N_K) sum_t (1/N) ||T_t - T*_t||^2` over `N_K` snapshots stored row by row.
pub fn loss_mse(pred: &[f64], target: &[f64], n: usize) -> Result<f64> {
    Ok(LossSpec::Mse.value(pred, target, n)?.total)
}

/// MSE plus `(1/N_K) sum_t ||sum_s Y_s(t) - sum_s Y*_s(t)||^2`.
pub fn loss_pa_mse(pred: &[f64], target: &[f64], n: usize, mass: &MassBalance) -> Result<LossValue> {
    LossSpec::PaMse(mass.clone()).value(pred, target, n)
}
