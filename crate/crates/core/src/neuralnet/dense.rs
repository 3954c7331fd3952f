//! Row-major dense kernels used by both models.

/// `out = W x + b`, `W` is `rows x cols`.
#[inline]
pub(super) fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for ((o, row), &bias) in out.iter_mut().zip(w.chunks_exact(cols)).zip(b) {
        *o = bias + dot(row, x);
    }
}

#[inline]
pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorisable while the order stays fixed
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// `out += W^T dz`
#[inline]
pub(super) fn accumulate_transpose(w: &[f64], dz: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (row, &d) in w.chunks_exact(cols).zip(dz) {
        if d != 0.0 {
            axpy(d, row, out);
        }
    }
}

/// `gw += scale * dz x^T`, `gb += scale * dz`
#[inline]
pub(super) fn accumulate_outer(gw: &mut [f64], gb: &mut [f64], dz: &[f64], x: &[f64], scale: f64) {
    let cols = x.len();
    for ((row, b), &d) in gw.chunks_exact_mut(cols).zip(gb.iter_mut()).zip(dz) {
        let s = scale * d;
        if s != 0.0 {
            axpy(s, x, row);
        }
        *b += s;
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
