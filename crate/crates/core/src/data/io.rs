//! Dataset container (`ROMF`), scaling-constant container (`ROMC`) and CSV
//! slice export.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "ROMF" | version u32 | N_v u64 | N_x u64 | N_y u64 | n_t u64 | dt f64
//! N_v x { name_len u32 | UTF-8 name | species flag u8 }
//! n_t x J f64, one flattened state (variable, x, y) per time instant
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Layout, ScalingStats, SnapshotTensor};
use crate::binio::{checked_product, Decoder, Encoder};
use crate::error::{Result, RomError};

pub const DATASET_MAGIC: &[u8; 4] = b"ROMF";

pub fn encode_dataset(tensor: &SnapshotTensor) -> Vec<u8> {
    let (nv, nx, ny, nt) = tensor.dims();
    let mut e = Encoder::new(DATASET_MAGIC);
    for d in [nv, nx, ny, nt] {
        e.usize(d);
    }
    e.f64(tensor.dt());
    for (name, &species) in tensor.var_names().iter().zip(tensor.is_species()) {
        e.str(name);
        e.u8(species as u8);
    }
    e.f64s(tensor.values().iter().copied());
    e.finish()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<SnapshotTensor> {
    let mut d = Decoder::new(bytes, DATASET_MAGIC, "dataset")?;
    let nv = d.usize()?;
    let nx = d.usize()?;
    let ny = d.usize()?;
    let nt = d.usize()?;
    let dt = d.f64()?;
    let count = checked_product(&[nv, nx, ny, nt], "dataset")?;
    if nv > d.remaining() {
        return Err(RomError::Corrupt(format!("dataset: {nv} variables cannot fit in file")));
    }
    let mut names = Vec::with_capacity(nv);
    let mut species = Vec::with_capacity(nv);
    for _ in 0..nv {
        names.push(d.str()?);
        species.push(match d.u8()? {
            0 => false,
            1 => true,
            x => return Err(RomError::Corrupt(format!("dataset: species flag {x}"))),
        });
    }
    let values = d.payload(count)?;
    d.finish()?;
    SnapshotTensor::new(Layout::new(nv, nx, ny), nt, dt, names, species, values)
}

pub fn write_dataset(path: &Path, tensor: &SnapshotTensor) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_dataset(tensor))?;
    f.sync_all()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<SnapshotTensor> {
    decode_dataset(&fs::read(path)?)
}

pub const STATS_MAGIC: &[u8; 4] = b"ROMC";

/// `"ROMC" | version | N_v, N_x, N_y u64 | epsilon f64 | J means | N_v sigmas`
pub fn encode_stats(stats: &ScalingStats) -> Vec<u8> {
    let l = stats.layout;
    let mut e = Encoder::new(STATS_MAGIC);
    for d in [l.n_vars, l.nx, l.ny] {
        e.usize(d);
    }
    e.f64(stats.epsilon);
    e.f64s(stats.mean.iter().copied());
    e.f64s(stats.sigma.iter().copied());
    e.finish()
}

pub fn decode_stats(bytes: &[u8]) -> Result<ScalingStats> {
    let mut d = Decoder::new(bytes, STATS_MAGIC, "scaling constants")?;
    let layout = Layout::new(d.usize()?, d.usize()?, d.usize()?);
    let j = checked_product(&[layout.n_vars, layout.nx, layout.ny], "scaling constants")?;
    let epsilon = d.f64()?;
    let count = j
        .checked_add(layout.n_vars)
        .ok_or_else(|| RomError::Corrupt("scaling constants: size overflows".into()))?;
    let values = d.payload(count)?;
    d.finish()?;
    ScalingStats::new(values[..j].to_vec(), values[j..].to_vec(), epsilon, layout)
        .map_err(|e| RomError::Corrupt(format!("scaling constants: {e}")))
}

pub fn write_stats(path: &Path, stats: &ScalingStats) -> Result<()> {
    fs::write(path, encode_stats(stats))?;
    Ok(())
}

pub fn read_stats(path: &Path) -> Result<ScalingStats> {
    decode_stats(&fs::read(path)?)
}

/// One (variable, time) slice as CSV: a row per y index, x along columns.
pub fn slice_csv(tensor: &SnapshotTensor, var: usize, k: usize) -> Result<String> {
    let (nv, nx, ny, nt) = tensor.dims();
    if var >= nv || k >= nt {
        return Err(RomError::InvalidInput(format!(
            "slice (var {var}, time {k}) outside {nv} variables x {nt} instants"
        )));
    }
    let mut out = String::new();
    for j in 0..ny {
        let row: Vec<String> = (0..nx)
            .map(|i| format!("{:e}", tensor.get(var, i, j, k)))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Writes `<prefix>_<var>_<k>.csv` for every time instant of `var`; returns the paths.
pub fn export_variable_csv(
    tensor: &SnapshotTensor,
    var: usize,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    let name = tensor
        .var_names()
        .get(var)
        .ok_or_else(|| RomError::InvalidInput(format!("no variable {var}")))?;
    let mut paths = Vec::with_capacity(tensor.n_t());
    for k in 0..tensor.n_t() {
        let path = dir.join(format!("{name}_{k:05}.csv"));
        fs::write(&path, slice_csv(tensor, var, k)?)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_round_trip() {
        let layout = Layout::new(2, 2, 1);
        let stats = ScalingStats::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 2.0], 1e-12, layout).unwrap();
        let buf = encode_stats(&stats);
        assert_eq!(decode_stats(&buf).unwrap(), stats);
        assert!(decode_stats(&buf[..buf.len() - 1]).is_err());
        assert!(matches!(decode_stats(&encode_dataset_magic_only()), Err(RomError::Format(_))));
    }

    fn encode_dataset_magic_only() -> Vec<u8> {
        let mut v = DATASET_MAGIC.to_vec();
        v.extend_from_slice(&1u32.to_le_bytes());
        v
    }

    fn sample() -> SnapshotTensor {
        let layout = Layout::new(2, 2, 3);
        let values: Vec<f64> = (0..24).map(|x| (x as f64).sin() * 1e3 + 0.1).collect();
        SnapshotTensor::new(
            layout,
            2,
            2.5e-4,
            vec!["T".into(), "Y_OH".into()],
            vec![false, true],
            values,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample();
        let back = decode_dataset(&encode_dataset(&t)).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.values().iter().zip(t.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let mut bytes = encode_dataset(&sample());
        bytes[0] = b'X';
        assert!(matches!(decode_dataset(&bytes), Err(RomError::Format(_))));
    }

    #[test]
    fn payload_length_mismatch_is_corruption() {
        let mut bytes = encode_dataset(&sample());
        // bump n_t from 2 to 3 without adding payload
        let nt_offset = 4 + 4 + 3 * 8;
        bytes[nt_offset..nt_offset + 8].copy_from_slice(&3u64.to_le_bytes());
        assert!(matches!(decode_dataset(&bytes), Err(RomError::Corrupt(_))));

        let mut short = encode_dataset(&sample());
        short.truncate(short.len() - 8);
        assert!(matches!(decode_dataset(&short), Err(RomError::Corrupt(_))));
    }

    #[test]
    fn truncated_header_is_error() {
        let bytes = encode_dataset(&sample());
        assert!(decode_dataset(&bytes[..20]).is_err());
    }

    #[test]
    fn overflowing_dims_are_corruption() {
        let mut bytes = encode_dataset(&sample());
        for off in [8usize, 16, 24, 32] {
            bytes[off..off + 8].copy_from_slice(&(u64::MAX / 3).to_le_bytes());
        }
        assert!(matches!(decode_dataset(&bytes), Err(RomError::Corrupt(_))));
    }

    #[test]
    fn csv_slice_is_row_per_y() {
        let t = sample();
        let csv = slice_csv(&t, 1, 0).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split(',').count() == 2));
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, t.get(1, 1, 2, 0));
        assert!(slice_csv(&t, 2, 0).is_err());
    }
}
