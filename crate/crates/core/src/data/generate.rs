//! Synthetic flame-like datasets.
//!
//! Each field is a smooth base field plus `rank` separable terms
//! `pattern_r(x, y) * c_r(t)`. The temporal coefficients are the inlet
//! modulation and its harmonics, `(A_m / divisor / h) * {sin, cos}(2 pi h f_m t)`,
//! taken in order of harmonic `h`, then profile term `m`, then sin before cos.
//! The spatial patterns are discrete cosine modes on the grid, so they are
//! mutually orthogonal and the centered data has exactly `rank` POD modes.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InletProfile, Layout, SnapshotTensor};
use crate::error::{Result, RomError};

const SPECIES_NAMES: [&str; 8] = ["CH4", "O2", "H2O", "CO2", "CO", "OH", "O", "C2H2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlameConfig {
    pub nx: usize,
    pub ny: usize,
    pub n_t: usize,
    pub dt: f64,
    pub profile: InletProfile,
    pub n_species: usize,
    pub rank: usize,
    pub seed: u64,
}

impl Default for FlameConfig {
    fn default() -> Self {
        FlameConfig {
            nx: 24,
            ny: 16,
            n_t: 999,
            dt: 2.5e-4,
            profile: InletProfile::single_frequency(),
            n_species: 4,
            rank: 6,
            seed: 0,
        }
    }
}

pub fn generate_synthetic_flame(cfg: &FlameConfig) -> Result<SnapshotTensor> {
    cfg.profile.validate()?;
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(RomError::InvalidInput(format!("dt must be positive, got {}", cfg.dt)));
    }
    if cfg.nx == 0 || cfg.ny == 0 || cfg.n_t == 0 {
        return Err(RomError::InvalidInput("grid and time dims must be >= 1".into()));
    }
    if cfg.n_species < 2 {
        return Err(RomError::InvalidInput(format!(
            "need at least 2 species, got {}",
            cfg.n_species
        )));
    }
    if cfg.profile.terms.is_empty() {
        return Err(RomError::InvalidInput("profile has no perturbation terms".into()));
    }
    let grid = cfg.nx * cfg.ny;
    if cfg.rank == 0 || cfg.rank > cfg.n_t.min(grid) {
        return Err(RomError::InvalidInput(format!(
            "rank {} must be in 1..={} (min of n_t = {} and grid size = {grid})",
            cfg.rank,
            cfg.n_t.min(grid),
            cfg.n_t
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let layout = Layout::new(1 + cfg.n_species, cfg.nx, cfg.ny);
    let xs: Vec<f64> = (0..cfg.nx).map(|i| (i as f64 + 0.5) / cfg.nx as f64).collect();
    let ys: Vec<f64> = (0..cfg.ny).map(|j| (j as f64 + 0.5) / cfg.ny as f64).collect();

    let patterns = cosine_patterns(&xs, &ys, cfg.rank);
    let coeffs = temporal_coefficients(&cfg.profile, cfg.rank, cfg.n_t, cfg.dt);
    let coeff_bound: f64 = coeffs
        .iter()
        .map(|c| c.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);

    let bump = |cx: f64, cy: f64, wx: f64, wy: f64| -> Vec<f64> {
        let mut out = Vec::with_capacity(grid);
        for &x in &xs {
            for &y in &ys {
                out.push((-((x - cx).powi(2) / wx + (y - cy).powi(2) / wy)).exp());
            }
        }
        out
    };
    let signed_unit = |rng: &mut ChaCha8Rng| -> f64 {
        let m = rng.gen_range(0.5..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    };

    // Temperature: hot core near the axis, fluctuations of a few hundred K.
    let temp_base: Vec<f64> = bump(0.55, 0.15, 0.12, 0.08)
        .into_iter()
        .map(|b| 300.0 + 1700.0 * b)
        .collect();
    let temp_amp: Vec<f64> = (0..cfg.rank)
        .map(|_| 250.0 * signed_unit(&mut rng) / coeff_bound)
        .collect();

    // Free species: base in [0.6 w, w], fluctuation bounded by 0.3 w, so each
    // stays in (0, 1) and their sum stays below 0.91.
    let n_free = cfg.n_species - 1;
    let mut species_base = Vec::with_capacity(n_free);
    let mut species_amp = Vec::with_capacity(n_free);
    for _ in 0..n_free {
        let w = 0.7 / n_free as f64 * rng.gen_range(0.5..1.0);
        let (cx, cy) = (rng.gen_range(0.2..0.8), rng.gen_range(0.0..0.6));
        species_base.push(
            bump(cx, cy, 0.1, 0.1)
                .into_iter()
                .map(|b| w * (0.6 + 0.4 * b))
                .collect::<Vec<_>>(),
        );
        species_amp.push(
            (0..cfg.rank)
                .map(|_| 0.3 * w * rng.gen_range(0.5..1.0) / coeff_bound)
                .collect::<Vec<_>>(),
        );
    }

    let state_len = layout.state_len();
    let mut values = vec![0.0; state_len * cfg.n_t];
    let mut fluct = vec![0.0; cfg.rank];
    for k in 0..cfg.n_t {
        let snap = &mut values[k * state_len..(k + 1) * state_len];
        for p in 0..grid {
            for (r, f) in fluct.iter_mut().enumerate() {
                *f = patterns[r][p] * coeffs[r][k];
            }
            let t: f64 = temp_base[p] + dot(&temp_amp, &fluct);
            snap[p] = t;
            let mut free_sum = 0.0;
            for s in 0..n_free {
                let y = species_base[s][p] + dot(&species_amp[s], &fluct);
                snap[(1 + s) * grid + p] = y;
                free_sum += y;
            }
            snap[cfg.n_species * grid + p] = 1.0 - free_sum;
        }
    }

    let mut names = vec!["T".to_string()];
    for s in 0..n_free {
        names.push(
            SPECIES_NAMES
                .get(s)
                .map(|n| n.to_string())
                .unwrap_or_else(|| format!("Y{}", s + 1)),
        );
    }
    names.push("N2".to_string());
    let mut is_species = vec![true; layout.n_vars];
    is_species[0] = false;

    SnapshotTensor::new(layout, cfg.n_t, cfg.dt, names, is_species, values)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Discrete cosine modes `cos(k pi x) cos(l pi y)` ordered by wavenumber,
/// the constant mode last.
fn cosine_patterns(xs: &[f64], ys: &[f64], count: usize) -> Vec<Vec<f64>> {
    let mut waves: Vec<(usize, usize)> = (0..xs.len())
        .flat_map(|k| (0..ys.len()).map(move |l| (k, l)))
        .filter(|&kl| kl != (0, 0))
        .collect();
    waves.sort_by_key(|&(k, l)| (k * k + l * l, k));
    waves.push((0, 0));
    waves
        .into_iter()
        .take(count)
        .map(|(k, l)| {
            xs.iter()
                .flat_map(|&x| {
                    ys.iter().map(move |&y| {
                        (k as f64 * PI * x).cos() * (l as f64 * PI * y).cos()
                    })
                })
                .collect()
        })
        .collect()
}

fn temporal_coefficients(profile: &InletProfile, count: usize, n_t: usize, dt: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut harmonic = 1usize;
    'outer: loop {
        for &(a, f) in &profile.terms {
            let amp = a / profile.divisor / harmonic as f64;
            let omega = 2.0 * PI * f * harmonic as f64;
            for use_cos in [false, true] {
                if out.len() == count {
                    break 'outer;
                }
                out.push(
                    (0..n_t)
                        .map(|k| {
                            let phase = omega * k as f64 * dt;
                            amp * if use_cos { phase.cos() } else { phase.sin() }
                        })
                        .collect(),
                );
            }
        }
        harmonic += 1;
    }
    out
}
