use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::Result;

/// Prediction quality over an evaluated time range.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub var_names: Vec<String>,
    /// First evaluated snapshot index in the source dataset.
    pub start: usize,
    /// Per-variable prediction RRMSE on centered and scaled fields.
    pub rrmse: Vec<f64>,
    /// Per-variable RRMSE of the truncated-basis projection of the truth.
    pub pod_floor: Vec<f64>,
    pub global_rrmse: f64,
    pub global_pod_floor: f64,
    /// `N x steps` normalized mode errors.
    pub nmse: DMatrix<f64>,
    /// Per-step max over grid of `|sum_s Y_s - 1|` of the prediction.
    pub mass_balance: Vec<f64>,
    /// Same statistic for the truth.
    pub truth_mass_balance: Vec<f64>,
}

impl EvalReport {
    pub fn steps(&self) -> usize {
        self.nmse.ncols()
    }

    pub fn max_nmse(&self, mode: usize) -> f64 {
        self.nmse.row(mode).iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_rrmse(&self) -> f64 {
        self.rrmse.iter().sum::<f64>() / self.rrmse.len() as f64
    }

    pub fn max_mass_balance(&self) -> f64 {
        self.mass_balance.iter().copied().fold(0.0, f64::max)
    }

    pub fn rrmse_csv(&self) -> String {
        let mut s = String::from("variable,rrmse,pod_floor\n");
        for ((name, e), f) in self.var_names.iter().zip(&self.rrmse).zip(&self.pod_floor) {
            let _ = writeln!(s, "{name},{e:e},{f:e}");
        }
        let _ = writeln!(s, "global,{:e},{:e}", self.global_rrmse, self.global_pod_floor);
        s
    }

    pub fn nmse_csv(&self) -> String {
        let mut s = String::from("step,snapshot");
        for j in 0..self.nmse.nrows() {
            let _ = write!(s, ",mode{j}");
        }
        s.push('\n');
        for k in 0..self.steps() {
            let _ = write!(s, "{k},{}", self.start + k);
            for j in 0..self.nmse.nrows() {
                let _ = write!(s, ",{:e}", self.nmse[(j, k)]);
            }
            s.push('\n');
        }
        s
    }

    pub fn mass_balance_csv(&self) -> String {
        let mut s = String::from("step,snapshot,predicted,truth\n");
        for k in 0..self.mass_balance.len() {
            let truth = self.truth_mass_balance.get(k).copied().unwrap_or(f64::NAN);
            let _ = writeln!(s, "{k},{},{:e},{truth:e}", self.start + k, self.mass_balance[k]);
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "evaluated steps: {} (snapshots {}..{})", self.steps(), self.start, self.start + self.steps());
        let _ = writeln!(s, "{:<10} {:>12} {:>12}", "variable", "rrmse", "pod floor");
        for ((name, e), f) in self.var_names.iter().zip(&self.rrmse).zip(&self.pod_floor) {
            let _ = writeln!(s, "{name:<10} {e:>12.4e} {f:>12.4e}");
        }
        let _ = writeln!(s, "{:<10} {:>12.4e} {:>12.4e}", "global", self.global_rrmse, self.global_pod_floor);
        for j in 0..self.nmse.nrows() {
            let _ = writeln!(s, "max n-MSE mode {j}: {:.4e}", self.max_nmse(j));
        }
        if !self.mass_balance.is_empty() {
            let _ = writeln!(s, "max mass-balance deviation: {:.4e}", self.max_mass_balance());
        }
        s
    }

    /// Writes `rrmse_per_variable.csv`, `nmse.csv`, `mass_balance.csv` and
    /// `summary.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("rrmse_per_variable.csv"), self.rrmse_csv())?;
        fs::write(dir.join("nmse.csv"), self.nmse_csv())?;
        fs::write(dir.join("mass_balance.csv"), self.mass_balance_csv())?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}
