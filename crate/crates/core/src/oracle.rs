//! Independent f64 reference model for gradient checking.
//!
//! Written with explicit padded indexing and no shared code with the
//! production kernels. Gradients come from central finite differences of the
//! reference loss; dropout masks are replayed from a [`ForwardCache`].

use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{Dims, ForwardCache, LayerKind, ModelSpec, ParameterSet};
use crate::tensor::Tensor;

/// Mean cross-entropy of `samples` under `params` (flat tensors in
/// weight/bias order), evaluated in f64.
pub fn reference_loss(
    spec: &ModelSpec,
    params: &[Vec<f64>],
    samples: &[Vec<f64>],
    labels: &[usize],
    masks: Option<&ForwardCache>,
) -> f64 {
    let plan = spec.plan().expect("valid spec");
    let mut total = 0.0;
    for (s, (x0, &label)) in samples.iter().zip(labels).enumerate() {
        let mut x = x0.clone();
        for (li, layer) in plan.iter().enumerate() {
            x = match (layer.kind, layer.input) {
                (LayerKind::Conv { filters }, Dims::Spatial { h, w, c }) => {
                    let p = layer.param.unwrap();
                    let (k, b) = (&params[2 * p], &params[2 * p + 1]);
                    let mut out = vec![0.0; h * w * filters];
                    for y in 0..h as i64 {
                        for xx in 0..w as i64 {
                            for f in 0..filters {
                                let mut acc = b[f];
                                for ky in 0..3i64 {
                                    for kx in 0..3i64 {
                                        let (iy, ix) = (y + ky - 1, xx + kx - 1);
                                        if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                            continue;
                                        }
                                        for ci in 0..c {
                                            let xin = x[((iy as usize) * w + ix as usize) * c + ci];
                                            let kv = k[(((ky * 3 + kx) as usize) * c + ci) * filters + f];
                                            acc += xin * kv;
                                        }
                                    }
                                }
                                out[((y as usize) * w + xx as usize) * filters + f] = acc;
                            }
                        }
                    }
                    out
                }
                (LayerKind::Dense { units }, Dims::Flat(n)) => {
                    let p = layer.param.unwrap();
                    let (wt, b) = (&params[2 * p], &params[2 * p + 1]);
                    (0..units).map(|j| b[j] + (0..n).map(|i| x[i] * wt[i * units + j]).sum::<f64>()).collect()
                }
                (LayerKind::MaxPool, Dims::Spatial { h, w, c }) => {
                    let (oh, ow) = (h / 2, w / 2);
                    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
                    for oy in 0..oh {
                        for ox in 0..ow {
                            for ch in 0..c {
                                let o = &mut out[(oy * ow + ox) * c + ch];
                                for dy in 0..2 {
                                    for dx in 0..2 {
                                        *o = o.max(x[((2 * oy + dy) * w + 2 * ox + dx) * c + ch]);
                                    }
                                }
                            }
                        }
                    }
                    out
                }
                (LayerKind::Relu, _) => x.iter().map(|&v| v.max(0.0)).collect(),
                (LayerKind::Dropout { .. }, _) => match masks.and_then(|m| m.dropout_mask(s, li)) {
                    Some(mask) => x.iter().zip(mask).map(|(v, &m)| v * f64::from(m)).collect(),
                    None => x,
                },
                (LayerKind::Flatten, _) => x,
                (LayerKind::Softmax, _) => {
                    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = x.iter().map(|v| libm::exp(v - max)).collect();
                    let sum: f64 = exps.iter().sum();
                    exps.into_iter().map(|e| e / sum).collect()
                }
                (kind, dims) => panic!("invalid layer {kind:?} on {dims:?}"),
            };
        }
        total -= libm::log(x[label].max(1e-12));
    }
    total / samples.len() as f64
}

/// Central finite-difference gradient of [`reference_loss`], one vector per
/// parameter tensor.
pub fn finite_difference_gradients(
    spec: &ModelSpec,
    params: &ParameterSet,
    batch: &Tensor,
    labels: &[usize],
    masks: Option<&ForwardCache>,
    step: f64,
) -> Vec<Vec<f64>> {
    let mut flat: Vec<Vec<f64>> =
        params.tensors().map(|t| t.data().iter().map(|&v| f64::from(v)).collect()).collect();
    let samples: Vec<Vec<f64>> = batch
        .data()
        .chunks_exact(spec.input.len())
        .map(|s| s.iter().map(|&v| f64::from(v)).collect())
        .collect();
    let mut grads = Vec::with_capacity(flat.len());
    for t in 0..flat.len() {
        let mut g = vec![0.0; flat[t].len()];
        for j in 0..flat[t].len() {
            let orig = flat[t][j];
            flat[t][j] = orig + step;
            let up = reference_loss(spec, &flat, &samples, labels, masks);
            flat[t][j] = orig - step;
            let down = reference_loss(spec, &flat, &samples, labels, masks);
            flat[t][j] = orig;
            g[j] = (up - down) / (2.0 * step);
        }
        grads.push(g);
    }
    grads
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
