//! `ROMW` parameter checkpoints: spec echo followed by the flat parameters.

use std::fs;
use std::path::Path;

use super::{count_parameters, Activation, ModelKind, Network, NetworkSpec, Parameters};
use crate::binio::{Decoder, Encoder};
use crate::error::{Result, RomError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ROMW";

pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let s = &net.spec;
    let mut e = Encoder::new(CHECKPOINT_MAGIC);
    e.u8(match s.kind {
        ModelKind::Lstm => 0,
        ModelKind::Cnn => 1,
    });
    for v in [
        s.n_modes,
        s.horizon,
        s.window,
        s.units,
        s.step_width,
        s.conv_channels[0],
        s.conv_channels[1],
        s.kernel,
        s.dense_width,
    ] {
        e.usize(v);
    }
    e.u8(s.hidden.code());
    e.u8(s.output.code());
    e.usize(net.params.len());
    e.f64s(net.params.values.iter().copied());
    e.finish()
}

/// Decodes a checkpoint. With `expected`, any difference between the stored
/// architecture and `expected` is an error.
pub fn decode_checkpoint(buf: &[u8], expected: Option<&NetworkSpec>) -> Result<Network> {
    let mut d = Decoder::new(buf, CHECKPOINT_MAGIC, "checkpoint")?;
    let kind = match d.u8()? {
        0 => ModelKind::Lstm,
        1 => ModelKind::Cnn,
        k => return Err(RomError::Corrupt(format!("checkpoint: unknown model kind {k}"))),
    };
    let mut dims = [0usize; 9];
    for v in &mut dims {
        *v = d.usize()?;
    }
    let act = |c: u8| {
        Activation::from_code(c).ok_or_else(|| RomError::Corrupt(format!("checkpoint: unknown activation {c}")))
    };
    let hidden = act(d.u8()?)?;
    let output = act(d.u8()?)?;
    let spec = NetworkSpec {
        kind,
        n_modes: dims[0],
        horizon: dims[1],
        window: dims[2],
        units: dims[3],
        step_width: dims[4],
        conv_channels: [dims[5], dims[6]],
        kernel: dims[7],
        dense_width: dims[8],
        hidden,
        output,
    };
    spec.validate()
        .map_err(|e| RomError::Corrupt(format!("checkpoint: stored architecture invalid: {e}")))?;
    if let Some(want) = expected {
        if *want != spec {
            return Err(RomError::Format(format!(
                "checkpoint architecture {spec:?} does not match expected {want:?}"
            )));
        }
    }
    let count = d.usize()?;
    if count != count_parameters(&spec) {
        return Err(RomError::Corrupt(format!(
            "checkpoint: {count} parameters stored, architecture needs {}",
            count_parameters(&spec)
        )));
    }
    let values = d.payload(count)?;
    d.finish()?;
    Network::with_params(spec, Parameters::from_values(&spec, values)?)
}

pub fn write_checkpoint(path: &Path, net: &Network) -> Result<()> {
    fs::write(path, encode_checkpoint(net))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path, expected: Option<&NetworkSpec>) -> Result<Network> {
    decode_checkpoint(&fs::read(path)?, expected)
}
