//! Pipeline directory: `state.roms` (preprocessing constants, mode scaler,
//! split, rollout seed), `basis.romb` and `model.romw`.

use std::fs;
use std::path::Path;

use super::RomPipeline;
use crate::binio::{checked_product, Decoder, Encoder};
use crate::data::{Layout, ScalingStats};
use crate::error::{Result, RomError};
use crate::forecast::{ModeScaler, ScalerKind, SplitPlan, Stride};
use crate::neuralnet::{read_checkpoint, write_checkpoint, Network};
use crate::pod::{read_basis, write_basis, PodBasis, TemporalModes};

pub const STATE_MAGIC: &[u8; 4] = b"ROMS";

/// File names inside a pipeline directory.
pub const PIPELINE_FILES: [&str; 3] = ["state.roms", "basis.romb", "model.romw"];

/// Everything in a pipeline except the basis and the network.
pub struct State {
    pub stats: ScalingStats,
    pub scaler: ModeScaler,
    pub split: SplitPlan,
    pub stride: Stride,
    pub dt: f64,
    pub var_names: Vec<String>,
    pub is_species: Vec<bool>,
    pub window: usize,
    pub seed_window: Vec<f64>,
}

pub fn encode_state(p: &RomPipeline) -> Vec<u8> {
    let mut e = Encoder::new(STATE_MAGIC);
    let l = p.stats.layout;
    for v in [l.n_vars, l.nx, l.ny] {
        e.usize(v);
    }
    e.f64(p.dt);
    for (name, &sp) in p.var_names.iter().zip(&p.is_species) {
        e.str(name);
        e.u8(sp as u8);
    }
    e.f64(p.stats.epsilon);
    e.u8(match p.scaler.kind {
        ScalerKind::SumOfMaxima => 0,
        ScalerKind::Range => 1,
    });
    e.usize(p.scaler.n_modes());
    for v in [p.split.n_train, p.split.n_val, p.split.n_test] {
        e.usize(v);
    }
    e.u8(match p.stride {
        Stride::Horizon => 0,
        Stride::One => 1,
    });
    e.usize(p.network.spec.window);
    e.f64s(p.stats.mean.iter().copied());
    e.f64s(p.stats.sigma.iter().copied());
    e.f64s(p.scaler.offset.iter().copied());
    e.f64s(p.scaler.factor.iter().copied());
    e.f64s(p.seed_window.iter().copied());
    e.finish()
}

pub fn decode_state(buf: &[u8]) -> Result<State> {
    let mut d = Decoder::new(buf, STATE_MAGIC, "pipeline state")?;
    let layout = Layout::new(d.usize()?, d.usize()?, d.usize()?);
    let j = checked_product(&[layout.n_vars, layout.nx, layout.ny], "pipeline state")?;
    let dt = d.f64()?;
    let mut var_names = Vec::new();
    let mut is_species = Vec::new();
    for _ in 0..layout.n_vars {
        var_names.push(d.str()?);
        is_species.push(d.u8()? != 0);
    }
    let epsilon = d.f64()?;
    let kind = match d.u8()? {
        0 => ScalerKind::SumOfMaxima,
        1 => ScalerKind::Range,
        k => return Err(RomError::Corrupt(format!("pipeline state: unknown scaler kind {k}"))),
    };
    let n = d.usize()?;
    let split = SplitPlan {
        n_train: d.usize()?,
        n_val: d.usize()?,
        n_test: d.usize()?,
    };
    let stride = match d.u8()? {
        0 => Stride::Horizon,
        1 => Stride::One,
        s => return Err(RomError::Corrupt(format!("pipeline state: unknown stride {s}"))),
    };
    let window = d.usize()?;
    let seed_len = checked_product(&[window, n], "pipeline state")?;
    let count = [j, layout.n_vars, n, n, seed_len]
        .iter()
        .try_fold(0usize, |acc, &c| acc.checked_add(c))
        .ok_or_else(|| RomError::Corrupt("pipeline state: size overflows".into()))?;
    let payload = d.payload(count)?;
    d.finish()?;
    let mut rest = payload.as_slice();
    let mut take = |len: usize| {
        let (head, tail) = rest.split_at(len);
        rest = tail;
        head.to_vec()
    };
    let mean = take(j);
    let sigma = take(layout.n_vars);
    let offset = take(n);
    let factor = take(n);
    let seed_window = take(seed_len);
    let stats = ScalingStats::new(mean, sigma, epsilon, layout)
        .map_err(|e| RomError::Corrupt(format!("pipeline state: {e}")))?;
    Ok(State {
        stats,
        scaler: ModeScaler { kind, offset, factor },
        split,
        stride,
        dt,
        var_names,
        is_species,
        window,
        seed_window,
    })
}

impl RomPipeline {
    /// Writes the three pipeline files into `dir` (created if missing).
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(PIPELINE_FILES[0]), encode_state(self))?;
        // the basis file carries the rollout seed's unscaled coefficients as
        // its temporal block so it stays self-describing
        let seed = TemporalModes {
            values: self.scaler.unscale(&seed_matrix(&self.seed_window, self.n_modes()))?,
        };
        write_basis(&dir.join(PIPELINE_FILES[1]), &self.basis, &seed)?;
        write_checkpoint(&dir.join(PIPELINE_FILES[2]), &self.network)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let state = decode_state(&fs::read(dir.join(PIPELINE_FILES[0]))?)?;
        let (basis, _): (PodBasis, _) = read_basis(&dir.join(PIPELINE_FILES[1]))?;
        let network: Network = read_checkpoint(&dir.join(PIPELINE_FILES[2]), None)?;
        let n = basis.n_modes();
        if basis.layout != state.stats.layout {
            return Err(RomError::mismatch(
                "basis layout",
                format!("{:?}", state.stats.layout),
                format!("{:?}", basis.layout),
            ));
        }
        if state.scaler.n_modes() != n {
            return Err(RomError::mismatch("mode scaler width", n, state.scaler.n_modes()));
        }
        if network.spec.n_modes != n {
            return Err(RomError::ModeCountMismatch {
                expected: network.spec.n_modes,
                available: n,
            });
        }
        if network.spec.window != state.window {
            return Err(RomError::mismatch("network window", state.window, network.spec.window));
        }
        Ok(RomPipeline {
            stats: state.stats,
            basis,
            scaler: state.scaler,
            network,
            split: state.split,
            stride: state.stride,
            dt: state.dt,
            var_names: state.var_names,
            is_species: state.is_species,
            seed_window: state.seed_window,
        })
    }
}

/// Row-major `q x N` window as an `N x q` matrix.
fn seed_matrix(seed: &[f64], n: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_column_slice(n, seed.len() / n, seed)
}
