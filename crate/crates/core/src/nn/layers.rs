use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Scalar;

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

/// Declarative description of one layer. Image-shaped tensors are
/// `[channels, height, width]`; sequences are `[steps, features]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        filters: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    Linear {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
    MaxPool {
        #[serde(default = "two")]
        size: usize,
    },
    Flatten,
    /// Runs over the leading (time) axis and emits the final hidden state.
    Gru {
        inputs: usize,
        hidden: usize,
    },
    /// Per-channel standardization of each sample (zero mean, unit variance).
    Normalize,
    /// Nearest-neighbor spatial upsampling.
    Upsample {
        factor: usize,
    },
    Reshape {
        shape: Vec<usize>,
    },
}

pub(crate) const NORM_EPS: f64 = 1e-5;

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Softmax => "softmax",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Gru { .. } => "gru",
            LayerSpec::Normalize => "normalize",
            LayerSpec::Upsample { .. } => "upsample",
            LayerSpec::Reshape { .. } => "reshape",
        }
    }

    /// Weight and bias shapes for layers that own parameters.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2d { in_channels, filters, kernel, .. } => {
                Some((vec![filters, in_channels, kernel, kernel], vec![filters]))
            }
            LayerSpec::Linear { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            LayerSpec::Gru { inputs, hidden } => Some((vec![3 * hidden, inputs + hidden], vec![3 * hidden])),
            _ => None,
        }
    }

    /// (fan_in, fan_out) used by Xavier initialization.
    pub fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv2d { in_channels, filters, kernel, .. } => {
                (in_channels * kernel * kernel, filters * kernel * kernel)
            }
            LayerSpec::Linear { inputs, outputs } => (inputs, outputs),
            LayerSpec::Gru { inputs, hidden } => (inputs + hidden, 3 * hidden),
            _ => (0, 0),
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        let n: usize = input.iter().product();
        let chw = || -> Result<(usize, usize, usize), String> {
            match *input {
                [c, h, w] => Ok((c, h, w)),
                _ => Err(format!("expected [channels, height, width], got {input:?}")),
            }
        };
        match self {
            LayerSpec::Conv2d { in_channels, filters, kernel, stride, padding } => {
                let (c, h, w) = chw()?;
                if c != *in_channels {
                    return Err(format!("expected {in_channels} input channels, got {c}"));
                }
                if *stride == 0 || *kernel == 0 {
                    return Err("kernel and stride must be positive".into());
                }
                if h + 2 * padding < *kernel || w + 2 * padding < *kernel {
                    return Err(format!("{h}x{w} input smaller than {kernel}x{kernel} kernel"));
                }
                Ok(vec![*filters, (h + 2 * padding - kernel) / stride + 1, (w + 2 * padding - kernel) / stride + 1])
            }
            LayerSpec::Linear { inputs, outputs } => {
                if input.len() != 1 || input[0] != *inputs {
                    return Err(format!("expected [{inputs}], got {input:?}"));
                }
                Ok(vec![*outputs])
            }
            LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Sigmoid | LayerSpec::Softmax => Ok(input.to_vec()),
            LayerSpec::MaxPool { size } => {
                let (c, h, w) = chw()?;
                if *size == 0 || h < *size || w < *size {
                    return Err(format!("{h}x{w} input too small for {size}x{size} pooling"));
                }
                Ok(vec![c, h / size, w / size])
            }
            LayerSpec::Flatten => Ok(vec![n]),
            LayerSpec::Gru { inputs, hidden } => match *input {
                [steps, f] if f == *inputs && steps > 0 => Ok(vec![*hidden]),
                _ => Err(format!("expected [steps, {inputs}], got {input:?}")),
            },
            LayerSpec::Normalize => {
                if input.len() == 3 || input.len() == 1 {
                    Ok(input.to_vec())
                } else {
                    Err(format!("expected [c, h, w] or [n], got {input:?}"))
                }
            }
            LayerSpec::Upsample { factor } => {
                let (c, h, w) = chw()?;
                if *factor == 0 {
                    return Err("factor must be positive".into());
                }
                Ok(vec![c, h * factor, w * factor])
            }
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != n {
                    return Err(format!("cannot reshape {input:?} to {shape:?}"));
                }
                Ok(shape.clone())
            }
        }
    }
}

/// Per-layer values saved by the forward pass for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub enum Cache<T> {
    None,
    Argmax(Vec<u32>),
    InvStd(Vec<T>),
    /// im2col matrix of a conv input.
    Cols(Vec<T>),
    Gru(Vec<GruStep<T>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GruStep<T> {
    pub h_prev: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub n: Vec<T>,
}

/// Output columns `x` of a strided conv row whose input column
/// `x·stride + kj − pad` lies in `[0, width)`.
#[inline]
fn valid_cols(out_w: usize, width: usize, kj: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if kj >= pad { 0 } else { (pad - kj).div_ceil(stride) };
    let span = width + pad;
    let hi = if span <= kj { 0 } else { ((span - kj - 1) / stride + 1).min(out_w) };
    (lo, hi.max(lo))
}

pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    pub oh: usize,
    pub ow: usize,
}

/// Unfolds the receptive fields into a `(c·k·k) × (oh·ow)` matrix; padded
/// taps are zero.
pub(crate) fn im2col<T: Scalar>(g: &ConvGeom, x: &[T]) -> Vec<T> {
    let plane = g.oh * g.ow;
    let mut cols = vec![T::zero(); g.c * g.k * g.k * plane];
    for c in 0..g.c {
        let x_c = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = &mut cols[((c * g.k + ki) * g.k + kj) * plane..][..plane];
                let (x_lo, x_hi) = valid_cols(g.ow, g.w, kj, g.s, g.p);
                for y in 0..g.oh {
                    let iy = (y * g.s + ki) as isize - g.p as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let row_in = &x_c[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let dst = &mut row[y * g.ow..(y + 1) * g.ow];
                    for xo in x_lo..x_hi {
                        dst[xo] = row_in[xo * g.s + kj - g.p];
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds a column-matrix gradient back onto the input.
fn col2im<T: Scalar>(g: &ConvGeom, cols: &[T], grad_in: &mut [T]) {
    let plane = g.oh * g.ow;
    for c in 0..g.c {
        let gi_c = &mut grad_in[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = &cols[((c * g.k + ki) * g.k + kj) * plane..][..plane];
                let (x_lo, x_hi) = valid_cols(g.ow, g.w, kj, g.s, g.p);
                for y in 0..g.oh {
                    let iy = (y * g.s + ki) as isize - g.p as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let gi_row = &mut gi_c[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let src = &row[y * g.ow..(y + 1) * g.ow];
                    for xo in x_lo..x_hi {
                        gi_row[xo * g.s + kj - g.p] += src[xo];
                    }
                }
            }
        }
    }
}

/// Dot product with eight independent partial sums, so the loop
/// vectorizes despite strict float ordering.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `dst += a·src`, elementwise.
#[inline]
fn axpy<T: Scalar>(dst: &mut [T], a: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Convolution as a product of the weight matrix with the unfolded input.
/// Returns the column matrix for the backward pass.
pub(crate) fn conv_forward<T: Scalar>(g: &ConvGeom, x: &[T], weight: &[T], bias: &[T], out: &mut [T]) -> Vec<T> {
    let plane = g.oh * g.ow;
    let kk = g.c * g.k * g.k;
    let cols = im2col(g, x);
    for o in 0..g.o {
        let out_o = &mut out[o * plane..(o + 1) * plane];
        out_o.iter_mut().for_each(|v| *v = bias[o]);
        let w_o = &weight[o * kk..(o + 1) * kk];
        for (r, &wv) in w_o.iter().enumerate() {
            if wv != T::zero() {
                axpy(out_o, wv, &cols[r * plane..(r + 1) * plane]);
            }
        }
    }
    cols
}

pub(crate) fn conv_backward<T: Scalar>(
    g: &ConvGeom,
    cols: &[T],
    weight: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    grad_in: &mut [T],
) {
    let plane = g.oh * g.ow;
    let kk = g.c * g.k * g.k;
    let mut grad_cols = vec![T::zero(); kk * plane];
    for o in 0..g.o {
        let g_o = &grad_out[o * plane..(o + 1) * plane];
        grad_b[o] += g_o.iter().copied().sum::<T>();
        let w_o = &weight[o * kk..(o + 1) * kk];
        let gw_o = &mut grad_w[o * kk..(o + 1) * kk];
        for r in 0..kk {
            let col = &cols[r * plane..(r + 1) * plane];
            gw_o[r] += dot(g_o, col);
            axpy(&mut grad_cols[r * plane..(r + 1) * plane], w_o[r], g_o);
        }
    }
    col2im(g, &grad_cols, grad_in);
}

pub(crate) fn linear_forward<T: Scalar>(inputs: usize, x: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    for (o, y) in out.iter_mut().enumerate() {
        *y = dot(&weight[o * inputs..(o + 1) * inputs], x) + bias[o];
    }
}

pub(crate) fn linear_backward<T: Scalar>(
    inputs: usize,
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    grad_in: &mut [T],
) {
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] += g;
        if g == T::zero() {
            continue;
        }
        let row = &weight[o * inputs..(o + 1) * inputs];
        let grow = &mut grad_w[o * inputs..(o + 1) * inputs];
        for ((gw, &v), (gi, &w)) in grow.iter_mut().zip(x).zip(grad_in.iter_mut().zip(row)) {
            *gw += g * v;
            *gi += g * w;
        }
    }
}

pub(crate) fn maxpool_forward<T: Scalar>(shape: &[usize], size: usize, x: &[T], out: &mut [T]) -> Vec<u32> {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h / size, w / size);
    let mut arg = vec![0u32; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let mut best = T::neg_infinity();
                let mut bi = 0;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = (ch * h + y * size + dy) * w + xo * size + dx;
                        // first maximum wins on ties
                        if x[i] > best {
                            best = x[i];
                            bi = i;
                        }
                    }
                }
                let o = (ch * oh + y) * ow + xo;
                out[o] = best;
                arg[o] = bi as u32;
            }
        }
    }
    arg
}

pub(crate) fn normalize_forward<T: Scalar>(shape: &[usize], x: &[T], out: &mut [T]) -> Vec<T> {
    let channels = if shape.len() == 3 { shape[0] } else { 1 };
    let plane = x.len() / channels;
    let mut inv = Vec::with_capacity(channels);
    for c in 0..channels {
        let xs = &x[c * plane..(c + 1) * plane];
        let n = T::of(plane as f64);
        let mean = xs.iter().copied().sum::<T>() / n;
        let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let is = T::one() / (var + T::of(NORM_EPS)).sqrt();
        for (o, &v) in out[c * plane..(c + 1) * plane].iter_mut().zip(xs) {
            *o = (v - mean) * is;
        }
        inv.push(is);
    }
    inv
}

pub(crate) fn normalize_backward<T: Scalar>(inv: &[T], y: &[T], grad_out: &[T], grad_in: &mut [T]) {
    let channels = inv.len();
    let plane = y.len() / channels;
    let n = T::of(plane as f64);
    for c in 0..channels {
        let r = c * plane..(c + 1) * plane;
        let (ys, gs) = (&y[r.clone()], &grad_out[r.clone()]);
        let mean_g = gs.iter().copied().sum::<T>() / n;
        let mean_gy = gs.iter().zip(ys).map(|(&g, &v)| g * v).sum::<T>() / n;
        for ((gi, &g), &v) in grad_in[r].iter_mut().zip(gs).zip(ys) {
            *gi = inv[c] * (g - mean_g - v * mean_gy);
        }
    }
}

pub(crate) fn upsample_forward<T: Scalar>(shape: &[usize], f: usize, x: &[T], out: &mut [T]) {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h * f, w * f);
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                out[(ch * oh + y) * ow + xo] = x[(ch * h + y / f) * w + xo / f];
            }
        }
    }
}

pub(crate) fn upsample_backward<T: Scalar>(shape: &[usize], f: usize, grad_out: &[T], grad_in: &mut [T]) {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h * f, w * f);
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                grad_in[(ch * h + y / f) * w + xo / f] += grad_out[(ch * oh + y) * ow + xo];
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

pub(crate) fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Runs a GRU over `steps` inputs of width `inputs`; returns the final
/// hidden state and the per-step cache.
pub(crate) fn gru_forward<T: Scalar>(
    inputs: usize,
    hidden: usize,
    x: &[T],
    weight: &[T],
    bias: &[T],
) -> (Vec<T>, Vec<GruStep<T>>) {
    let steps = x.len() / inputs;
    let cols = inputs + hidden;
    let mut h = vec![T::zero(); hidden];
    let mut cache = Vec::with_capacity(steps);
    let row = |g: usize, j: usize| &weight[(g * hidden + j) * cols..(g * hidden + j + 1) * cols];
    for t in 0..steps {
        let xt = &x[t * inputs..(t + 1) * inputs];
        let pre = |g: usize, j: usize, hv: &[T]| {
            let r = row(g, j);
            let mut acc = bias[g * hidden + j];
            for (w, &v) in r[..inputs].iter().zip(xt) {
                acc += *w * v;
            }
            for (w, &v) in r[inputs..].iter().zip(hv) {
                acc += *w * v;
            }
            acc
        };
        let z: Vec<T> = (0..hidden).map(|j| sigmoid(pre(0, j, &h))).collect();
        let r: Vec<T> = (0..hidden).map(|j| sigmoid(pre(1, j, &h))).collect();
        let rh: Vec<T> = r.iter().zip(&h).map(|(&a, &b)| a * b).collect();
        let n: Vec<T> = (0..hidden).map(|j| pre(2, j, &rh).tanh()).collect();
        let h_next: Vec<T> = (0..hidden).map(|j| (T::one() - z[j]) * h[j] + z[j] * n[j]).collect();
        cache.push(GruStep { h_prev: h, z, r, n });
        h = h_next;
    }
    (h, cache)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_backward<T: Scalar>(
    inputs: usize,
    hidden: usize,
    x: &[T],
    weight: &[T],
    cache: &[GruStep<T>],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    grad_in: &mut [T],
) {
    let cols = inputs + hidden;
    let mut dh: Vec<T> = grad_out.to_vec();
    for t in (0..cache.len()).rev() {
        let GruStep { h_prev, z, r, n } = &cache[t];
        let xt = &x[t * inputs..(t + 1) * inputs];
        let one = T::one();
        let da_n: Vec<T> = (0..hidden).map(|j| dh[j] * z[j] * (one - n[j] * n[j])).collect();
        let da_z: Vec<T> = (0..hidden).map(|j| dh[j] * (n[j] - h_prev[j]) * z[j] * (one - z[j])).collect();
        let mut dh_prev: Vec<T> = (0..hidden).map(|j| dh[j] * (one - z[j])).collect();
        // gradient through r ⊙ h_prev inside the candidate
        let mut drh = vec![T::zero(); hidden];
        for j in 0..hidden {
            let rw = &weight[(2 * hidden + j) * cols + inputs..(2 * hidden + j + 1) * cols];
            for k in 0..hidden {
                drh[k] += rw[k] * da_n[j];
            }
        }
        let da_r: Vec<T> = (0..hidden).map(|k| drh[k] * h_prev[k] * r[k] * (one - r[k])).collect();
        for k in 0..hidden {
            dh_prev[k] += drh[k] * r[k];
        }
        let rh: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        for (g, da, hv) in [(0, &da_z, h_prev), (1, &da_r, h_prev), (2, &da_n, &rh)] {
            for j in 0..hidden {
                let d = da[j];
                let ri = (g * hidden + j) * cols;
                grad_b[g * hidden + j] += d;
                let w = &weight[ri..ri + cols];
                let gw = &mut grad_w[ri..ri + cols];
                for k in 0..inputs {
                    gw[k] += d * xt[k];
                    grad_in[t * inputs + k] += d * w[k];
                }
                for k in 0..hidden {
                    gw[inputs + k] += d * hv[k];
                    if g < 2 {
                        dh_prev[k] += d * w[inputs + k];
                    }
                }
            }
        }
        dh = dh_prev;
    }
}
