//! Proper orthogonal decomposition by the snapshot method.
//!
//! For a `J x K` matrix with `K << J` the decomposition is taken from the
//! `K x K` Gram matrix `X^T X = T Sigma^2 T^T`; spatial modes follow as
//! `U = X T Sigma^-1` and the temporal modes as `T^ = Sigma T^T`.
//!
//! Basis container (`ROMB`), little-endian:
//!
//! ```text
//! "ROMB" | version u32 | J u64 | N u64 | K u64 | R u64 | N_v u64 | N_x u64 | N_y u64
//! spectrum: R f64 | U: J x N f64, one mode after another | T^: N x K f64, one mode series after another
//! ```
//!
//! `R` is the number of resolved singular values before truncation; the first
//! `N` of them are the retained ones.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::binio::{checked_product, Decoder, Encoder};
use crate::data::{Layout, SnapshotMatrix};
use crate::error::{Result, RomError};

pub const BASIS_MAGIC: &[u8; 4] = b"ROMB";

/// Relative eigenvalue floor of the Gram matrix, per snapshot. Singular values
/// below `sqrt(GRAM_EIG_TOL * K) * sigma_1` are numerical zeros: the Gram route
/// cannot resolve them.
const GRAM_EIG_TOL: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// `J x N`, orthonormal columns.
    pub modes: DMatrix<f64>,
    /// Every resolved singular value of the decomposed matrix, nonincreasing.
    /// The first `modes.ncols()` belong to the retained modes.
    pub spectrum: Vec<f64>,
    pub layout: Layout,
}

impl PodBasis {
    pub fn n_modes(&self) -> usize {
        self.modes.ncols()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.spectrum[..self.n_modes()]
    }

    pub fn total_singular_sum(&self) -> f64 {
        self.spectrum.iter().sum()
    }
}

/// `N x K` matrix `Sigma T^T`; row `j` is the coefficient series `c_j(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalModes {
    pub values: DMatrix<f64>,
}

impl TemporalModes {
    pub fn n_modes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMetric {
    /// Ratio of summed singular values.
    #[default]
    SingularSum,
    /// Ratio of summed squared singular values.
    SquaredSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    ModeCount(usize),
    EnergyTarget(f64),
}

pub fn compute_pod(x: &SnapshotMatrix) -> Result<(PodBasis, TemporalModes)> {
    let (j, k) = (x.nrows(), x.ncols());
    if k < 2 || j < 1 {
        return Err(RomError::InvalidInput(format!(
            "POD needs J >= 1 and K >= 2, got {j} x {k}"
        )));
    }
    if let Some(pos) = x.values.iter().position(|v| !v.is_finite()) {
        return Err(RomError::NonFinite(format!("snapshot matrix entry {pos}")));
    }

    let gram = x.values.tr_mul(&x.values);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let lead = eig.eigenvalues[order[0]].max(0.0);
    if lead == 0.0 {
        return Err(RomError::ZeroNorm(None));
    }
    let floor = GRAM_EIG_TOL * k as f64 * lead;
    let kept: Vec<usize> = order
        .into_iter()
        .take_while(|&i| eig.eigenvalues[i] > floor)
        .collect();
    let n = kept.len();

    let spectrum: Vec<f64> = kept.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
    let right = DMatrix::from_fn(k, n, |r, c| eig.eigenvectors[(r, kept[c])]);
    let mut modes = &x.values * &right;
    let mut temporal = right.transpose();
    for c in 0..n {
        let s = spectrum[c];
        let mut col = modes.column_mut(c);
        col /= s;
        // largest-magnitude entry of each spatial mode is positive
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        let sign = if col[imax] < 0.0 { -1.0 } else { 1.0 };
        col *= sign;
        let mut row = temporal.row_mut(c);
        row *= s * sign;
    }

    Ok((
        PodBasis {
            modes,
            spectrum,
            layout: x.layout,
        },
        TemporalModes { values: temporal },
    ))
}

pub fn energy_fraction(basis: &PodBasis, n: usize, metric: EnergyMetric) -> Result<f64> {
    let r = basis.spectrum.len();
    if n == 0 || n > r {
        return Err(RomError::InvalidInput(format!(
            "mode count {n} outside 1..={r}"
        )));
    }
    let weight = |s: f64| match metric {
        EnergyMetric::SingularSum => s,
        EnergyMetric::SquaredSum => s * s,
    };
    let total: f64 = basis.spectrum.iter().map(|&s| weight(s)).sum();
    let head: f64 = basis.spectrum[..n].iter().map(|&s| weight(s)).sum();
    Ok(head / total)
}

/// Resolves a truncation criterion to a mode count.
pub fn select_mode_count(basis: &PodBasis, criterion: Truncation, metric: EnergyMetric) -> Result<usize> {
    let available = basis.n_modes();
    match criterion {
        Truncation::ModeCount(n) => {
            if n == 0 || n > available {
                return Err(RomError::InvalidInput(format!(
                    "cannot keep {n} modes, {available} available"
                )));
            }
            Ok(n)
        }
        Truncation::EnergyTarget(e) => {
            if !(e > 0.0 && e <= 1.0) {
                return Err(RomError::InvalidInput(format!(
                    "energy target {e} must lie in (0, 1]"
                )));
            }
            for n in 1..=available {
                if energy_fraction(basis, n, metric)? >= e {
                    return Ok(n);
                }
            }
            Err(RomError::InvalidInput(format!(
                "energy target {e} not reachable with {available} modes"
            )))
        }
    }
}

pub fn truncate(
    basis: &PodBasis,
    modes: &TemporalModes,
    criterion: Truncation,
    metric: EnergyMetric,
) -> Result<(PodBasis, TemporalModes)> {
    if modes.n_modes() != basis.n_modes() {
        return Err(RomError::mismatch("temporal mode rows", basis.n_modes(), modes.n_modes()));
    }
    let n = select_mode_count(basis, criterion, metric)?;
    Ok((
        PodBasis {
            modes: basis.modes.columns(0, n).into_owned(),
            spectrum: basis.spectrum.clone(),
            layout: basis.layout,
        },
        TemporalModes {
            values: modes.values.rows(0, n).into_owned(),
        },
    ))
}

/// `X^ = U T^`
pub fn reconstruct(basis: &PodBasis, modes: &TemporalModes) -> Result<SnapshotMatrix> {
    if basis.n_modes() != modes.n_modes() {
        return Err(RomError::mismatch("reconstruction inner dim", basis.n_modes(), modes.n_modes()));
    }
    SnapshotMatrix::new(&basis.modes * &modes.values, basis.layout)
}

/// Temporal coefficients of arbitrary snapshots: `U^T X`.
pub fn project(basis: &PodBasis, x: &SnapshotMatrix) -> Result<TemporalModes> {
    if x.nrows() != basis.modes.nrows() {
        return Err(RomError::mismatch("projection rows", basis.modes.nrows(), x.nrows()));
    }
    Ok(TemporalModes {
        values: basis.modes.tr_mul(&x.values),
    })
}

/// `||X - X^||_F / ||X||_F`
pub fn rrmse(reference: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<f64> {
    if reference.shape() != approx.shape() {
        return Err(RomError::mismatch(
            "rrmse operands",
            format!("{:?}", reference.shape()),
            format!("{:?}", approx.shape()),
        ));
    }
    let norm = reference.norm();
    if norm == 0.0 {
        return Err(RomError::ZeroNorm(None));
    }
    Ok((reference - approx).norm() / norm)
}

pub fn encode_basis(basis: &PodBasis, modes: &TemporalModes) -> Result<Vec<u8>> {
    if basis.n_modes() != modes.n_modes() {
        return Err(RomError::mismatch("basis/temporal modes", basis.n_modes(), modes.n_modes()));
    }
    let mut e = Encoder::new(BASIS_MAGIC);
    e.usize(basis.modes.nrows());
    e.usize(basis.n_modes());
    e.usize(modes.n_snapshots());
    e.usize(basis.spectrum.len());
    e.usize(basis.layout.n_vars);
    e.usize(basis.layout.nx);
    e.usize(basis.layout.ny);
    e.f64s(basis.spectrum.iter().copied());
    // nalgebra storage is column-major: U is mode by mode already
    e.f64s(basis.modes.iter().copied());
    e.f64s(modes.values.transpose().iter().copied());
    Ok(e.finish())
}

pub fn decode_basis(bytes: &[u8]) -> Result<(PodBasis, TemporalModes)> {
    let mut d = Decoder::new(bytes, BASIS_MAGIC, "basis")?;
    let j = d.usize()?;
    let n = d.usize()?;
    let k = d.usize()?;
    let r = d.usize()?;
    let layout = Layout::new(d.usize()?, d.usize()?, d.usize()?);
    if checked_product(&[layout.n_vars, layout.nx, layout.ny], "basis")? != j {
        return Err(RomError::Corrupt(format!("basis: layout {layout:?} does not match J = {j}")));
    }
    if n > r {
        return Err(RomError::Corrupt(format!("basis: {n} modes but spectrum of {r}")));
    }
    let count = checked_product(&[j, n], "basis")?
        .checked_add(checked_product(&[n, k], "basis")?)
        .and_then(|c| c.checked_add(r))
        .ok_or_else(|| RomError::Corrupt("basis: payload size overflows".into()))?;
    let payload = d.payload(count)?;
    d.finish()?;
    let spectrum = payload[..r].to_vec();
    let modes = DMatrix::from_column_slice(j, n, &payload[r..r + j * n]);
    let temporal = DMatrix::from_row_slice(n, k, &payload[r + j * n..]);
    Ok((
        PodBasis {
            modes,
            spectrum,
            layout,
        },
        TemporalModes { values: temporal },
    ))
}

pub fn write_basis(path: &Path, basis: &PodBasis, modes: &TemporalModes) -> Result<()> {
    fs::write(path, encode_basis(basis, modes)?)?;
    Ok(())
}

pub fn read_basis(path: &Path) -> Result<(PodBasis, TemporalModes)> {
    decode_basis(&fs::read(path)?)
}
