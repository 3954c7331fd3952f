//! Snapshot data model: the 4-axis field tensor, its snapshot-matrix view,
//! preprocessing and dataset files.
//!
//! Flatten order is fixed: variable-major, then x, then y. A state vector at
//! one time instant therefore has index `(v * nx + i) * ny + j`, and the tensor
//! stores one such vector per time instant, time-major.

mod generate;
pub mod io;
mod profile;
mod scaling;

pub use generate::{generate_synthetic_flame, FlameConfig};
pub use profile::InletProfile;
pub use scaling::{DEFAULT_SIGMA_FLOOR, center_scale, compute_scaling_stats, inverse_center_scale, ScalingStats};

use nalgebra::DMatrix;

use crate::error::{Result, RomError};

/// Shape of one state vector: `n_vars` fields on an `nx` x `ny` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_vars: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Layout {
    pub fn new(n_vars: usize, nx: usize, ny: usize) -> Self {
        Layout { n_vars, nx, ny }
    }

    pub fn grid_points(&self) -> usize {
        self.nx * self.ny
    }

    /// Rows per snapshot, `J`.
    pub fn state_len(&self) -> usize {
        self.n_vars * self.grid_points()
    }

    #[inline]
    pub fn row(&self, var: usize, i: usize, j: usize) -> usize {
        (var * self.nx + i) * self.ny + j
    }

    pub fn var_of_row(&self, row: usize) -> usize {
        row / self.grid_points()
    }

    /// Row range holding variable `var`.
    pub fn var_rows(&self, var: usize) -> std::ops::Range<usize> {
        let g = self.grid_points();
        var * g..(var + 1) * g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTensor {
    layout: Layout,
    n_t: usize,
    dt: f64,
    var_names: Vec<String>,
    is_species: Vec<bool>,
    values: Vec<f64>,
}

impl SnapshotTensor {
    pub fn new(
        layout: Layout,
        n_t: usize,
        dt: f64,
        var_names: Vec<String>,
        is_species: Vec<bool>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if layout.n_vars == 0 || layout.nx == 0 || layout.ny == 0 || n_t == 0 {
            return Err(RomError::InvalidInput(format!(
                "all dims must be >= 1, got {}x{}x{}x{}",
                layout.n_vars, layout.nx, layout.ny, n_t
            )));
        }
        let expected = layout
            .state_len()
            .checked_mul(n_t)
            .ok_or_else(|| RomError::InvalidInput("tensor size overflows".into()))?;
        if values.len() != expected {
            return Err(RomError::mismatch("tensor values", expected, values.len()));
        }
        if var_names.len() != layout.n_vars {
            return Err(RomError::mismatch("variable names", layout.n_vars, var_names.len()));
        }
        if is_species.len() != layout.n_vars {
            return Err(RomError::mismatch("species mask", layout.n_vars, is_species.len()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(RomError::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(RomError::NonFinite(format!("tensor entry {pos}")));
        }
        Ok(SnapshotTensor {
            layout,
            n_t,
            dt,
            var_names,
            is_species,
            values,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// `(N_v, N_x, N_y, n_t)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.layout.n_vars, self.layout.nx, self.layout.ny, self.n_t)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn is_species(&self) -> &[bool] {
        &self.is_species
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, var: usize, i: usize, j: usize, k: usize) -> f64 {
        self.values[k * self.layout.state_len() + self.layout.row(var, i, j)]
    }

    /// State vector at time index `k`.
    pub fn snapshot(&self, k: usize) -> &[f64] {
        let j = self.layout.state_len();
        &self.values[k * j..(k + 1) * j]
    }

    /// Sub-range of time instants as a new tensor.
    pub fn time_slice(&self, range: std::ops::Range<usize>) -> Result<SnapshotTensor> {
        if range.start >= range.end || range.end > self.n_t {
            return Err(RomError::InvalidInput(format!(
                "time range {range:?} outside 0..{}",
                self.n_t
            )));
        }
        let j = self.layout.state_len();
        SnapshotTensor::new(
            self.layout,
            range.len(),
            self.dt,
            self.var_names.clone(),
            self.is_species.clone(),
            self.values[range.start * j..range.end * j].to_vec(),
        )
    }

    /// Max over grid points of `|sum_species Y - 1|`, one entry per time instant.
    /// Empty when no species are flagged.
    pub fn mass_balance_deviation(&self) -> Vec<f64> {
        let species: Vec<usize> = (0..self.layout.n_vars)
            .filter(|&v| self.is_species[v])
            .collect();
        if species.is_empty() {
            return Vec::new();
        }
        let g = self.layout.grid_points();
        (0..self.n_t)
            .map(|k| {
                let snap = self.snapshot(k);
                (0..g)
                    .map(|p| {
                        let sum: f64 = species.iter().map(|&v| snap[v * g + p]).sum();
                        (sum - 1.0).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn to_snapshot_matrix(&self) -> SnapshotMatrix {
        SnapshotMatrix {
            values: DMatrix::from_column_slice(self.layout.state_len(), self.n_t, &self.values),
            layout: self.layout,
        }
    }

    /// Inverse of [`to_snapshot_matrix`](Self::to_snapshot_matrix), with metadata supplied.
    pub fn from_snapshot_matrix(
        matrix: &SnapshotMatrix,
        dt: f64,
        var_names: Vec<String>,
        is_species: Vec<bool>,
    ) -> Result<SnapshotTensor> {
        SnapshotTensor::new(
            matrix.layout,
            matrix.ncols(),
            dt,
            var_names,
            is_species,
            matrix.values.as_slice().to_vec(),
        )
    }
}

/// `J x K` matrix whose column `k` is the flattened state at time `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub values: DMatrix<f64>,
    pub layout: Layout,
}

impl SnapshotMatrix {
    pub fn new(values: DMatrix<f64>, layout: Layout) -> Result<Self> {
        if values.nrows() != layout.state_len() {
            return Err(RomError::mismatch(
                "snapshot matrix rows",
                layout.state_len(),
                values.nrows(),
            ));
        }
        Ok(SnapshotMatrix { values, layout })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn columns(&self, range: std::ops::Range<usize>) -> SnapshotMatrix {
        SnapshotMatrix {
            values: self.values.columns(range.start, range.len()).into_owned(),
            layout: self.layout,
        }
    }
}
