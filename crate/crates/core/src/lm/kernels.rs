//! Dense row-major kernels. Every output row is computed with a fixed
//! operation order that does not depend on how many rows are processed,
//! so prefix rows are bitwise stable when a sequence grows.

use crate::scalar::Scalar;

#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight interleaved partial sums.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let xa = &a[c * 8..c * 8 + 8];
        let xb = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            lanes[l] += xa[l] * xb[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
        + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
        + tail
}

/// `out[i, :] = bias + Σ_k x[i, k] · w[k, :]` for `x: n × din`, `w: din × dout`.
pub fn linear<T: Scalar>(x: &[T], w: &[T], bias: &[T], din: usize, dout: usize, out: &mut [T]) {
    let n = x.len() / din;
    debug_assert_eq!(out.len(), n * dout);
    let mut i = 0;
    while i + 4 <= n {
        let (o0, rest) = out[i * dout..(i + 4) * dout].split_at_mut(dout);
        let (o1, rest) = rest.split_at_mut(dout);
        let (o2, o3) = rest.split_at_mut(dout);
        o0.copy_from_slice(bias);
        o1.copy_from_slice(bias);
        o2.copy_from_slice(bias);
        o3.copy_from_slice(bias);
        let x0 = &x[i * din..(i + 1) * din];
        let x1 = &x[(i + 1) * din..(i + 2) * din];
        let x2 = &x[(i + 2) * din..(i + 3) * din];
        let x3 = &x[(i + 3) * din..(i + 4) * din];
        for k in 0..din {
            let wr = &w[k * dout..(k + 1) * dout];
            let (a0, a1, a2, a3) = (x0[k], x1[k], x2[k], x3[k]);
            for o in 0..dout {
                let wv = wr[o];
                o0[o] += a0 * wv;
                o1[o] += a1 * wv;
                o2[o] += a2 * wv;
                o3[o] += a3 * wv;
            }
        }
        i += 4;
    }
    for r in i..n {
        let orow = &mut out[r * dout..(r + 1) * dout];
        orow.copy_from_slice(bias);
        let xr = &x[r * din..(r + 1) * din];
        for k in 0..din {
            axpy(xr[k], &w[k * dout..(k + 1) * dout], orow);
        }
    }
}

pub fn transpose<T: Scalar>(w: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = w[r * cols + c];
        }
    }
    t
}

/// Backward of [`linear`]: accumulates `dw`, `db` and writes `dx`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    dy: &[T],
    din: usize,
    dout: usize,
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let n = x.len() / din;
    for r in 0..n {
        let dyr = &dy[r * dout..(r + 1) * dout];
        for (b, &g) in db.iter_mut().zip(dyr) {
            *b += g;
        }
    }
    let mut i = 0;
    while i + 4 <= n {
        let d0 = &dy[i * dout..(i + 1) * dout];
        let d1 = &dy[(i + 1) * dout..(i + 2) * dout];
        let d2 = &dy[(i + 2) * dout..(i + 3) * dout];
        let d3 = &dy[(i + 3) * dout..(i + 4) * dout];
        for k in 0..din {
            let (a0, a1, a2, a3) = (
                x[i * din + k],
                x[(i + 1) * din + k],
                x[(i + 2) * din + k],
                x[(i + 3) * din + k],
            );
            let row = &mut dw[k * dout..(k + 1) * dout];
            for o in 0..dout {
                row[o] += a0 * d0[o] + a1 * d1[o] + a2 * d2[o] + a3 * d3[o];
            }
        }
        i += 4;
    }
    for r in i..n {
        let dyr = &dy[r * dout..(r + 1) * dout];
        for k in 0..din {
            axpy(x[r * din + k], dyr, &mut dw[k * dout..(k + 1) * dout]);
        }
    }
    if let Some(dx) = dx {
        let wt = transpose(w, din, dout);
        let zero = vec![T::zero(); din];
        linear(dy, &wt, &zero, dout, din, dx);
    }
}

pub struct LayerNormCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub const LN_EPS: f64 = 1e-5;

pub fn layer_norm<T: Scalar>(x: &[T], g: &[T], b: &[T], out: &mut [T]) -> LayerNormCache<T> {
    let d = g.len();
    let n = x.len() / d;
    let eps = T::from_f64_lossy(LN_EPS);
    let inv_d = T::one() / T::from_usize(d).unwrap();
    let mut xhat = vec![T::zero(); n * d];
    let mut rstd = vec![T::zero(); n];
    for r in 0..n {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().copied().fold(T::zero(), |a, v| a + v) * inv_d;
        let var = xr.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) * inv_d;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        let xh = &mut xhat[r * d..(r + 1) * d];
        let o = &mut out[r * d..(r + 1) * d];
        for j in 0..d {
            xh[j] = (xr[j] - mean) * rs;
            o[j] = xh[j] * g[j] + b[j];
        }
    }
    LayerNormCache { xhat, rstd }
}

/// Accumulates `dg`, `db` and writes `dx`.
pub fn layer_norm_backward<T: Scalar>(
    cache: &LayerNormCache<T>,
    g: &[T],
    dy: &[T],
    dg: &mut [T],
    db: &mut [T],
    dx: &mut [T],
) {
    let d = g.len();
    let n = dy.len() / d;
    let inv_d = T::one() / T::from_usize(d).unwrap();
    let mut dxhat = vec![T::zero(); d];
    for r in 0..n {
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let dyr = &dy[r * d..(r + 1) * d];
        let mut sum = T::zero();
        let mut sum_x = T::zero();
        for j in 0..d {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
            dxhat[j] = dyr[j] * g[j];
            sum += dxhat[j];
            sum_x += dxhat[j] * xh[j];
        }
        let mean = sum * inv_d;
        let mean_x = sum_x * inv_d;
        let rs = cache.rstd[r];
        let dxr = &mut dx[r * d..(r + 1) * d];
        for j in 0..d {
            dxr[j] = rs * (dxhat[j] - mean - xh[j] * mean_x);
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let c = T::from_f64_lossy(GELU_C);
    let a = T::from_f64_lossy(GELU_A);
    let half = T::from_f64_lossy(0.5);
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::from_f64_lossy(GELU_C);
    let a = T::from_f64_lossy(GELU_A);
    let half = T::from_f64_lossy(0.5);
    let three = T::from_f64_lossy(3.0);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + three * a * x * x)
}

/// In-place softmax of one row; returns the log of the normalizer after
/// subtracting the row max (so `log p_j = x_j - max - lse`).
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) -> (T, T) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = T::one() / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
    (max, sum.ln())
}
