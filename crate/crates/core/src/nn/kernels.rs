//! Slice-level layer kernels. Activations are HWC row-major, conv kernels are
//! laid out `[ky][kx][in_channel][filter]`, dense weights `[input][unit]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 3×3 SAME convolution, stride 1.
pub(crate) fn conv_forward(
    input: &[f32],
    (h, w, c): (usize, usize, usize),
    kernel: &[f32],
    bias: &[f32],
    out: &mut [f32],
) {
    let f = bias.len();
    debug_assert_eq!(kernel.len(), 9 * c * f);
    debug_assert_eq!(out.len(), h * w * f);
    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y * w + x) * f..(y * w + x + 1) * f];
            o.copy_from_slice(bias);
            for ky in 0..3 {
                let Some(iy) = (y + ky).checked_sub(1).filter(|&iy| iy < h) else {
                    continue;
                };
                for kx in 0..3 {
                    let Some(ix) = (x + kx).checked_sub(1).filter(|&ix| ix < w) else {
                        continue;
                    };
                    let px = &input[(iy * w + ix) * c..(iy * w + ix + 1) * c];
                    let k = &kernel[(ky * 3 + kx) * c * f..(ky * 3 + kx + 1) * c * f];
                    for (ci, &v) in px.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let row = &k[ci * f..(ci + 1) * f];
                        for (acc, &kv) in o.iter_mut().zip(row) {
                            *acc += v * kv;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates kernel/bias gradients and, when `d_input` is given, writes the
/// input gradient (overwriting it).
pub(crate) fn conv_backward(
    input: &[f32],
    (h, w, c): (usize, usize, usize),
    kernel: &[f32],
    d_out: &[f32],
    d_kernel: &mut [f32],
    d_bias: &mut [f32],
    mut d_input: Option<&mut [f32]>,
) {
    let f = d_bias.len();
    if let Some(di) = d_input.as_deref_mut() {
        di.fill(0.0);
    }
    for y in 0..h {
        for x in 0..w {
            let g = &d_out[(y * w + x) * f..(y * w + x + 1) * f];
            for (db, &gv) in d_bias.iter_mut().zip(g) {
                *db += gv;
            }
            for ky in 0..3 {
                let Some(iy) = (y + ky).checked_sub(1).filter(|&iy| iy < h) else {
                    continue;
                };
                for kx in 0..3 {
                    let Some(ix) = (x + kx).checked_sub(1).filter(|&ix| ix < w) else {
                        continue;
                    };
                    let base = (iy * w + ix) * c;
                    let koff = (ky * 3 + kx) * c * f;
                    for ci in 0..c {
                        let v = input[base + ci];
                        let row = koff + ci * f..koff + (ci + 1) * f;
                        if v != 0.0 {
                            for (dk, &gv) in d_kernel[row.clone()].iter_mut().zip(g) {
                                *dk += v * gv;
                            }
                        }
                        if let Some(di) = d_input.as_deref_mut() {
                            let mut s = 0.0f32;
                            for (&kv, &gv) in kernel[row].iter().zip(g) {
                                s += kv * gv;
                            }
                            di[base + ci] += s;
                        }
                    }
                }
            }
        }
    }
}

/// 2×2 max pooling with stride 2; `argmax` receives the flat input index of
/// the first maximal cell of each window in row-major scan order.
pub(crate) fn pool_forward(
    input: &[f32],
    (h, w, c): (usize, usize, usize),
    out: &mut [f32],
    argmax: &mut [u32],
) {
    let (oh, ow) = (h / 2, w / 2);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best_idx = ((2 * oy) * w + 2 * ox) * c + ch;
                let mut best = input[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                    if input[idx] > best {
                        best = input[idx];
                        best_idx = idx;
                    }
                }
                let o = (oy * ow + ox) * c + ch;
                out[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
}

pub(crate) fn pool_backward(d_out: &[f32], argmax: &[u32], d_input: &mut [f32]) {
    d_input.fill(0.0);
    for (&g, &idx) in d_out.iter().zip(argmax) {
        d_input[idx as usize] += g;
    }
}

pub(crate) fn dense_forward(input: &[f32], weight: &[f32], bias: &[f32], out: &mut [f32]) {
    let units = bias.len();
    out.copy_from_slice(bias);
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(&weight[i * units..(i + 1) * units]) {
            *o += x * wv;
        }
    }
}

pub(crate) fn dense_backward(
    input: &[f32],
    weight: &[f32],
    d_out: &[f32],
    d_weight: &mut [f32],
    d_bias: &mut [f32],
    d_input: Option<&mut [f32]>,
) {
    let units = d_out.len();
    for (db, &g) in d_bias.iter_mut().zip(d_out) {
        *db += g;
    }
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (dw, &g) in d_weight[i * units..(i + 1) * units].iter_mut().zip(d_out) {
            *dw += x * g;
        }
    }
    if let Some(di) = d_input {
        for (i, d) in di.iter_mut().enumerate() {
            let mut s = 0.0f32;
            for (&wv, &g) in weight[i * units..(i + 1) * units].iter().zip(d_out) {
                s += wv * g;
            }
            *d = s;
        }
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f32], out: &mut [f32]) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = libm::expf(z - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn spatial(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::shape(format!("{what} must be H×W×C, got {:?}", t.shape()))),
    }
}

/// 3×3 SAME-padded convolution of an H×W×C input with a 3×3×C×F kernel bank.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (h, w, c) = spatial(input, "conv input")?;
    let f = match *kernels.shape() {
        [3, 3, kc, f] if kc == c => f,
        [3, 3, kc, _] => {
            return Err(Error::shape(format!("kernel expects {kc} channels, input has {c}")));
        }
        _ => return Err(Error::shape(format!("kernel must be 3×3×C×F, got {:?}", kernels.shape()))),
    };
    if bias.shape() != [f] {
        return Err(Error::shape(format!("bias must have {f} entries, got {:?}", bias.shape())));
    }
    let mut out = vec![0.0; h * w * f];
    conv_forward(input.data(), (h, w, c), kernels.data(), bias.data(), &mut out);
    Tensor::from_vec(&[h, w, f], out)
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub fn maxpool2(input: &Tensor) -> Result<Tensor> {
    let (h, w, c) = spatial(input, "pool input")?;
    if h < 2 || w < 2 {
        return Err(Error::shape(format!("maxpool needs at least 2×2, got {h}×{w}")));
    }
    let n = (h / 2) * (w / 2) * c;
    let mut out = vec![0.0; n];
    let mut argmax: Vec<u32> = vec![0; n];
    pool_forward(input.data(), (h, w, c), &mut out, &mut argmax);
    Tensor::from_vec(&[h / 2, w / 2, c], out)
}
