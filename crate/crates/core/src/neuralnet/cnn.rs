//! Conv1D model. A valid, stride-1 convolution over a row-major `L x C_in`
//! sequence is a matvec per output position, because the receptive field
//! `x[t..t+k]` is one contiguous slice of length `k * C_in`.

use super::dense::{accumulate_outer, accumulate_transpose, affine};
use super::lstm::split_pair;
use super::{check_finite, NetworkSpec, Parameters};
use crate::error::Result;

const W_CONV1: usize = 0;
const B_CONV1: usize = 1;
const W_CONV2: usize = 2;
const B_CONV2: usize = 3;
const W_FC1: usize = 4;
const B_FC1: usize = 5;
const W_FC2: usize = 6;
const B_FC2: usize = 7;

fn head(k: usize) -> (usize, usize) {
    (8 + 2 * k, 9 + 2 * k)
}

pub(super) struct Cache {
    input: Vec<f64>,
    conv1_z: Vec<f64>,
    conv1_a: Vec<f64>,
    conv2_z: Vec<f64>,
    /// Flattened second convolution output, time-major.
    conv2_a: Vec<f64>,
    fc1_z: Vec<f64>,
    fc1_a: Vec<f64>,
    fc2_z: Vec<f64>,
    fc2_a: Vec<f64>,
    head_z: Vec<f64>,
    pub output: Vec<f64>,
}

fn conv(w: &[f64], b: &[f64], x: &[f64], c_in: usize, kernel: usize, c_out: usize) -> Vec<f64> {
    let len_in = x.len() / c_in;
    let len_out = len_in + 1 - kernel;
    let mut out = vec![0.0; len_out * c_out];
    for t in 0..len_out {
        affine(
            w,
            b,
            &x[t * c_in..(t + kernel) * c_in],
            &mut out[t * c_out..(t + 1) * c_out],
        );
    }
    out
}

pub(super) fn forward(spec: &NetworkSpec, params: &Parameters, x: &[f64]) -> Result<Cache> {
    let n = spec.n_modes;
    let k = spec.kernel;
    let [c1, c2] = spec.conv_channels;
    let d = spec.dense_width;
    let act = |v: &Vec<f64>| v.iter().map(|&z| spec.hidden.apply(z)).collect::<Vec<f64>>();

    let conv1_z = conv(params.block(W_CONV1), params.block(B_CONV1), x, n, k, c1);
    let conv1_a = act(&conv1_z);
    check_finite(&conv1_a, 1, "conv1")?;
    let conv2_z = conv(params.block(W_CONV2), params.block(B_CONV2), &conv1_a, c1, k, c2);
    let conv2_a = act(&conv2_z);
    check_finite(&conv2_a, 2, "conv2")?;

    let mut fc1_z = vec![0.0; d];
    affine(params.block(W_FC1), params.block(B_FC1), &conv2_a, &mut fc1_z);
    let fc1_a = act(&fc1_z);
    check_finite(&fc1_a, 4, "fc1")?;
    let mut fc2_z = vec![0.0; d];
    affine(params.block(W_FC2), params.block(B_FC2), &fc1_a, &mut fc2_z);
    let fc2_a = act(&fc2_z);
    check_finite(&fc2_a, 5, "fc2")?;

    let p = spec.horizon;
    let mut head_z = vec![0.0; p * n];
    for kk in 0..p {
        let (wi, bi) = head(kk);
        affine(params.block(wi), params.block(bi), &fc2_a, &mut head_z[kk * n..(kk + 1) * n]);
    }
    let output: Vec<f64> = head_z.iter().map(|&z| spec.output.apply(z)).collect();
    check_finite(&output, 7, "heads")?;

    Ok(Cache {
        input: x.to_vec(),
        conv1_z,
        conv1_a,
        conv2_z,
        conv2_a,
        fc1_z,
        fc1_a,
        fc2_z,
        fc2_a,
        head_z,
        output,
    })
}

pub(super) fn backward(
    spec: &NetworkSpec,
    params: &Parameters,
    cache: &Cache,
    dy: &[f64],
    scale: f64,
    grads: &mut [f64],
) {
    let n = spec.n_modes;
    let k = spec.kernel;
    let [c1, c2] = spec.conv_channels;
    let d = spec.dense_width;
    let p = spec.horizon;
    let slots = params.slots();
    let range = |i: usize| slots[i].range();
    let through = |da: &[f64], z: &[f64]| -> Vec<f64> {
        da.iter()
            .zip(z)
            .map(|(&g, &z)| g * spec.hidden.derivative(z))
            .collect()
    };

    // every head reads the same fc2 output
    let mut d_fc2 = vec![0.0; d];
    for kk in 0..p {
        let (wi, bi) = head(kk);
        let dz: Vec<f64> = (0..n)
            .map(|j| dy[kk * n + j] * spec.output.derivative(cache.head_z[kk * n + j]))
            .collect();
        let (gw, gb) = split_pair(grads, range(wi), range(bi));
        accumulate_outer(gw, gb, &dz, &cache.fc2_a, scale);
        accumulate_transpose(params.block(wi), &dz, &mut d_fc2);
    }

    let dz = through(&d_fc2, &cache.fc2_z);
    let (gw, gb) = split_pair(grads, range(W_FC2), range(B_FC2));
    accumulate_outer(gw, gb, &dz, &cache.fc1_a, scale);
    let mut d_fc1 = vec![0.0; d];
    accumulate_transpose(params.block(W_FC2), &dz, &mut d_fc1);

    let dz = through(&d_fc1, &cache.fc1_z);
    let (gw, gb) = split_pair(grads, range(W_FC1), range(B_FC1));
    accumulate_outer(gw, gb, &dz, &cache.conv2_a, scale);
    let mut d_conv2 = vec![0.0; cache.conv2_a.len()];
    accumulate_transpose(params.block(W_FC1), &dz, &mut d_conv2);

    let dz2 = through(&d_conv2, &cache.conv2_z);
    let mut d_conv1 = vec![0.0; cache.conv1_a.len()];
    conv_backward(
        params.block(W_CONV2),
        grads,
        (range(W_CONV2), range(B_CONV2)),
        &cache.conv1_a,
        &dz2,
        (c1, k, c2),
        scale,
        Some(&mut d_conv1),
    );

    let dz1 = through(&d_conv1, &cache.conv1_z);
    conv_backward(
        params.block(W_CONV1),
        grads,
        (range(W_CONV1), range(B_CONV1)),
        &cache.input,
        &dz1,
        (n, k, c1),
        scale,
        None,
    );
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    w: &[f64],
    grads: &mut [f64],
    (wr, br): (std::ops::Range<usize>, std::ops::Range<usize>),
    x: &[f64],
    dz: &[f64],
    (c_in, kernel, c_out): (usize, usize, usize),
    scale: f64,
    mut dx: Option<&mut [f64]>,
) {
    let (gw, gb) = split_pair(grads, wr, br);
    let len_out = dz.len() / c_out;
    for t in 0..len_out {
        let dzt = &dz[t * c_out..(t + 1) * c_out];
        accumulate_outer(gw, gb, dzt, &x[t * c_in..(t + kernel) * c_in], scale);
        if let Some(dx) = dx.as_deref_mut() {
            accumulate_transpose(w, dzt, &mut dx[t * c_in..(t + kernel) * c_in]);
        }
    }
}
