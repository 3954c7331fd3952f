//! LSTM model: recurrent encoder over the window, then the FC expansion to
//! `p` rows, a shared per-row FC and one output head per row.
//!
//! Cell update with hidden activation `act` (replacing tanh):
//!
//! ```text
//! [i f g o] = [sig sig act sig](W [x_t; h_{t-1}] + b)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * act(c_t)
//! ```

use super::dense::{accumulate_outer, accumulate_transpose, affine};
use super::{check_finite, sigmoid, NetworkSpec, Parameters};
use crate::error::Result;

const W_LSTM: usize = 0;
const B_LSTM: usize = 1;
const W_EXPAND: usize = 2;
const B_EXPAND: usize = 3;
const W_STEP: usize = 4;
const B_STEP: usize = 5;

fn head(k: usize) -> (usize, usize) {
    (6 + 2 * k, 7 + 2 * k)
}

pub(super) struct Cache {
    /// `q x (N + U)`: `[x_t; h_{t-1}]` per step.
    concat: Vec<f64>,
    /// `q x 4U` pre-activations.
    gate_z: Vec<f64>,
    /// `q x 4U` activated gates.
    gates: Vec<f64>,
    /// `(q + 1) x U`, row 0 is the zero initial state.
    cells: Vec<f64>,
    hidden: Vec<f64>,
    expand_z: Vec<f64>,
    expand_a: Vec<f64>,
    step_z: Vec<f64>,
    step_a: Vec<f64>,
    head_z: Vec<f64>,
    pub output: Vec<f64>,
}

pub(super) fn forward(spec: &NetworkSpec, params: &Parameters, x: &[f64]) -> Result<Cache> {
    let n = spec.n_modes;
    let u = spec.units;
    let q = spec.window;
    let p = spec.horizon;
    let s = spec.step_width;
    let width = n + u;

    let w = params.block(W_LSTM);
    let b = params.block(B_LSTM);
    let mut concat = vec![0.0; q * width];
    let mut gate_z = vec![0.0; q * 4 * u];
    let mut gates = vec![0.0; q * 4 * u];
    let mut cells = vec![0.0; (q + 1) * u];
    let mut h = vec![0.0; u];

    for t in 0..q {
        let cat = &mut concat[t * width..(t + 1) * width];
        cat[..n].copy_from_slice(&x[t * n..(t + 1) * n]);
        cat[n..].copy_from_slice(&h);
        let z = &mut gate_z[t * 4 * u..(t + 1) * 4 * u];
        affine(w, b, cat, z);
        let g = &mut gates[t * 4 * u..(t + 1) * 4 * u];
        for k in 0..u {
            g[k] = sigmoid(z[k]);
            g[u + k] = sigmoid(z[u + k]);
            g[2 * u + k] = spec.hidden.apply(z[2 * u + k]);
            g[3 * u + k] = sigmoid(z[3 * u + k]);
        }
        let (prev, next) = cells.split_at_mut((t + 1) * u);
        let c_prev = &prev[t * u..];
        let c = &mut next[..u];
        for k in 0..u {
            c[k] = g[u + k] * c_prev[k] + g[k] * g[2 * u + k];
            h[k] = g[3 * u + k] * spec.hidden.apply(c[k]);
        }
    }
    check_finite(&h, 1, "lstm")?;

    let mut expand_z = vec![0.0; p * u];
    affine(params.block(W_EXPAND), params.block(B_EXPAND), &h, &mut expand_z);
    let expand_a: Vec<f64> = expand_z.iter().map(|&v| spec.hidden.apply(v)).collect();
    check_finite(&expand_a, 2, "fc_expand")?;

    let mut step_z = vec![0.0; p * s];
    for k in 0..p {
        affine(
            params.block(W_STEP),
            params.block(B_STEP),
            &expand_a[k * u..(k + 1) * u],
            &mut step_z[k * s..(k + 1) * s],
        );
    }
    let step_a: Vec<f64> = step_z.iter().map(|&v| spec.hidden.apply(v)).collect();
    check_finite(&step_a, 4, "fc_step")?;

    let mut head_z = vec![0.0; p * n];
    for k in 0..p {
        let (wi, bi) = head(k);
        affine(
            params.block(wi),
            params.block(bi),
            &step_a[k * s..(k + 1) * s],
            &mut head_z[k * n..(k + 1) * n],
        );
    }
    let output: Vec<f64> = head_z.iter().map(|&v| spec.output.apply(v)).collect();
    check_finite(&output, 6, "heads")?;

    Ok(Cache {
        concat,
        gate_z,
        gates,
        cells,
        hidden: h,
        expand_z,
        expand_a,
        step_z,
        step_a,
        head_z,
        output,
    })
}

/// Adds `scale * dL/dtheta` to `grads` given `dy = dL/d output`.
pub(super) fn backward(
    spec: &NetworkSpec,
    params: &Parameters,
    cache: &Cache,
    dy: &[f64],
    scale: f64,
    grads: &mut [f64],
) {
    let n = spec.n_modes;
    let u = spec.units;
    let q = spec.window;
    let p = spec.horizon;
    let s = spec.step_width;
    let width = n + u;
    let slots = params.slots();
    let range = |i: usize| slots[i].range();

    // heads
    let mut d_step_a = vec![0.0; p * s];
    for k in 0..p {
        let (wi, bi) = head(k);
        let dz: Vec<f64> = (0..n)
            .map(|j| dy[k * n + j] * spec.output.derivative(cache.head_z[k * n + j]))
            .collect();
        let (gw, gb) = split_pair(grads, range(wi), range(bi));
        accumulate_outer(gw, gb, &dz, &cache.step_a[k * s..(k + 1) * s], scale);
        accumulate_transpose(params.block(wi), &dz, &mut d_step_a[k * s..(k + 1) * s]);
    }

    // shared per-row FC
    let mut d_expand_a = vec![0.0; p * u];
    {
        let dz: Vec<f64> = d_step_a
            .iter()
            .zip(&cache.step_z)
            .map(|(&d, &z)| d * spec.hidden.derivative(z))
            .collect();
        let (gw, gb) = split_pair(grads, range(W_STEP), range(B_STEP));
        for k in 0..p {
            accumulate_outer(
                gw,
                gb,
                &dz[k * s..(k + 1) * s],
                &cache.expand_a[k * u..(k + 1) * u],
                scale,
            );
            accumulate_transpose(
                params.block(W_STEP),
                &dz[k * s..(k + 1) * s],
                &mut d_expand_a[k * u..(k + 1) * u],
            );
        }
    }

    // expansion FC
    let mut dh = vec![0.0; u];
    {
        let dz: Vec<f64> = d_expand_a
            .iter()
            .zip(&cache.expand_z)
            .map(|(&d, &z)| d * spec.hidden.derivative(z))
            .collect();
        let (gw, gb) = split_pair(grads, range(W_EXPAND), range(B_EXPAND));
        accumulate_outer(gw, gb, &dz, &cache.hidden, scale);
        accumulate_transpose(params.block(W_EXPAND), &dz, &mut dh);
    }

    // back-propagation through time
    let w = params.block(W_LSTM);
    let mut dc = vec![0.0; u];
    let mut dz = vec![0.0; 4 * u];
    let mut dcat = vec![0.0; width];
    for t in (0..q).rev() {
        let z = &cache.gate_z[t * 4 * u..(t + 1) * 4 * u];
        let g = &cache.gates[t * 4 * u..(t + 1) * 4 * u];
        let c = &cache.cells[(t + 1) * u..(t + 2) * u];
        let c_prev = &cache.cells[t * u..(t + 1) * u];
        for k in 0..u {
            let (gi, gf, gg, go) = (g[k], g[u + k], g[2 * u + k], g[3 * u + k]);
            let act_c = spec.hidden.apply(c[k]);
            let d_o = dh[k] * act_c;
            let dck = dc[k] + dh[k] * go * spec.hidden.derivative(c[k]);
            dz[k] = dck * gg * gi * (1.0 - gi);
            dz[u + k] = dck * c_prev[k] * gf * (1.0 - gf);
            dz[2 * u + k] = dck * gi * spec.hidden.derivative(z[2 * u + k]);
            dz[3 * u + k] = d_o * go * (1.0 - go);
            dc[k] = dck * gf;
        }
        let (gw, gb) = split_pair(grads, range(W_LSTM), range(B_LSTM));
        accumulate_outer(gw, gb, &dz, &cache.concat[t * width..(t + 1) * width], scale);
        dcat.fill(0.0);
        accumulate_transpose(w, &dz, &mut dcat);
        dh.copy_from_slice(&dcat[n..]);
    }
}

/// Disjoint mutable views of a weight block and its bias (bias follows weight).
pub(super) fn split_pair(
    grads: &mut [f64],
    w: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
) -> (&mut [f64], &mut [f64]) {
    debug_assert_eq!(w.end, b.start);
    let (left, right) = grads.split_at_mut(w.end);
    (&mut left[w.start..], &mut right[..b.len()])
}
