use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::kernels;
use super::params::{Gradients, ParameterSet};
use super::spec::{Dims, LayerKind, LayerPlan, ModelSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped to this floor before taking the log.
pub const LOG_CLAMP: f32 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active (inverted scaling).
    Train,
    /// Dropout is the identity.
    Eval,
}

#[derive(Debug, Clone)]
enum Aux {
    None,
    Argmax(Vec<u32>),
    Mask(Vec<f32>),
}

#[derive(Debug, Clone)]
struct SampleCache {
    /// Input activation of every layer, in layer order.
    inputs: Vec<Vec<f32>>,
    aux: Vec<Aux>,
    probs: Vec<f32>,
}

/// Activations retained by [`forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    samples: Vec<SampleCache>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The dropout mask (scale factors, 0 for dropped units) applied at
    /// `layer` for sample `sample`, if that layer is a dropout layer run in
    /// train mode.
    pub fn dropout_mask(&self, sample: usize, layer: usize) -> Option<&[f32]> {
        match self.samples.get(sample)?.aux.get(layer)? {
            Aux::Mask(m) => Some(m),
            _ => None,
        }
    }
}

fn spatial(d: Dims) -> (usize, usize, usize) {
    match d {
        Dims::Spatial { h, w, c } => (h, w, c),
        Dims::Flat(n) => (1, 1, n),
    }
}

/// Runs one sample through the network.
fn forward_sample<R: Rng + ?Sized>(
    plan: &[LayerPlan],
    params: &ParameterSet,
    input: &[f32],
    mode: Mode,
    rng: &mut R,
    keep: bool,
) -> Result<(Vec<f32>, Option<SampleCache>)> {
    let mut cache = keep.then(|| SampleCache {
        inputs: Vec::with_capacity(plan.len()),
        aux: Vec::with_capacity(plan.len()),
        probs: Vec::new(),
    });
    let mut x = input.to_vec();
    for (i, layer) in plan.iter().enumerate() {
        let mut aux = Aux::None;
        let y = match layer.kind {
            LayerKind::Conv { .. } => {
                let p = &params.layers()[layer.param.unwrap()];
                let mut out = vec![0.0; layer.output.len()];
                kernels::conv_forward(&x, spatial(layer.input), p.weight.data(), p.bias.data(), &mut out);
                out
            }
            LayerKind::Dense { .. } => {
                let p = &params.layers()[layer.param.unwrap()];
                let mut out = vec![0.0; layer.output.len()];
                kernels::dense_forward(&x, p.weight.data(), p.bias.data(), &mut out);
                out
            }
            LayerKind::MaxPool => {
                let n = layer.output.len();
                let mut out = vec![0.0; n];
                let mut arg = vec![0u32; n];
                kernels::pool_forward(&x, spatial(layer.input), &mut out, &mut arg);
                aux = Aux::Argmax(arg);
                out
            }
            LayerKind::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            LayerKind::Dropout { rate } if mode == Mode::Train && rate > 0.0 => {
                let scale = 1.0 / (1.0 - rate);
                let mask: Vec<f32> =
                    (0..x.len()).map(|_| if rng.random::<f32>() < rate { 0.0 } else { scale }).collect();
                let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
                aux = Aux::Mask(mask);
                out
            }
            LayerKind::Dropout { .. } | LayerKind::Flatten => x.clone(),
            LayerKind::Softmax => {
                let mut out = vec![0.0; x.len()];
                kernels::softmax(&x, &mut out);
                out
            }
        };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFault { layer: i });
        }
        match cache.as_mut() {
            Some(c) => {
                c.inputs.push(core::mem::replace(&mut x, y));
                c.aux.push(aux);
            }
            None => x = y,
        }
    }
    if let Some(c) = cache.as_mut() {
        c.probs = x.clone();
    }
    Ok((x, cache))
}

/// Backpropagates `d_logits` (gradient w.r.t. the softmax input) through one
/// sample, accumulating into `grads`.
fn backward_sample(
    plan: &[LayerPlan],
    params: &ParameterSet,
    cache: &SampleCache,
    d_logits: Vec<f32>,
    grads: &mut Gradients,
) {
    let first_param = plan.iter().position(|p| p.param.is_some()).unwrap_or(plan.len());
    let mut g = d_logits;
    for i in (0..plan.len()).rev() {
        if i < first_param {
            break;
        }
        let layer = &plan[i];
        let input = &cache.inputs[i];
        let need_input = i > first_param;
        match layer.kind {
            LayerKind::Softmax | LayerKind::Flatten => {}
            LayerKind::Relu => {
                for (gv, &v) in g.iter_mut().zip(input) {
                    if v <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            LayerKind::Dropout { .. } => {
                if let Aux::Mask(mask) = &cache.aux[i] {
                    for (gv, m) in g.iter_mut().zip(mask) {
                        *gv *= m;
                    }
                }
            }
            LayerKind::MaxPool => {
                if let Aux::Argmax(arg) = &cache.aux[i] {
                    let mut d_in = vec![0.0; layer.input.len()];
                    kernels::pool_backward(&g, arg, &mut d_in);
                    g = d_in;
                }
            }
            LayerKind::Conv { .. } => {
                let idx = layer.param.unwrap();
                let kernel = params.layers()[idx].weight.data();
                let gl = &mut grads.layers_mut()[idx];
                let mut d_in = need_input.then(|| vec![0.0; layer.input.len()]);
                kernels::conv_backward(
                    input,
                    spatial(layer.input),
                    kernel,
                    &g,
                    gl.weight.data_mut(),
                    gl.bias.data_mut(),
                    d_in.as_deref_mut(),
                );
                g = d_in.unwrap_or_default();
            }
            LayerKind::Dense { .. } => {
                let idx = layer.param.unwrap();
                let weight = params.layers()[idx].weight.data();
                let gl = &mut grads.layers_mut()[idx];
                let mut d_in = need_input.then(|| vec![0.0; layer.input.len()]);
                kernels::dense_backward(
                    input,
                    weight,
                    &g,
                    gl.weight.data_mut(),
                    gl.bias.data_mut(),
                    d_in.as_deref_mut(),
                );
                g = d_in.unwrap_or_default();
            }
        }
    }
}

fn check_batch(spec: &ModelSpec, batch: &Tensor) -> Result<usize> {
    let i = spec.input;
    match *batch.shape() {
        [n, h, w, c] if h == i.height && w == i.width && c == i.channels && n > 0 => Ok(n),
        _ => Err(Error::shape(format!(
            "batch shape {:?} does not match N×{}×{}×{}",
            batch.shape(),
            i.height,
            i.width,
            i.channels
        ))),
    }
}

fn prepare(spec: &ModelSpec, params: &ParameterSet) -> Result<Vec<LayerPlan>> {
    let plan = spec.plan()?;
    params.check_spec(spec)?;
    Ok(plan)
}

/// Forward pass over an N×H×W×C batch. Returns N×classes probabilities and
/// the cache needed by the backward pass.
pub fn forward<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &ParameterSet,
    batch: &Tensor,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor, ForwardCache)> {
    let plan = prepare(spec, params)?;
    let n = check_batch(spec, batch)?;
    let stride = spec.input.len();
    let mut probs = Vec::with_capacity(n * spec.classes);
    let mut samples = Vec::with_capacity(n);
    for sample in batch.data().chunks_exact(stride) {
        let (p, cache) = forward_sample(&plan, params, sample, mode, rng, true)?;
        probs.extend_from_slice(&p);
        samples.push(cache.unwrap());
    }
    Ok((Tensor::from_vec(&[n, spec.classes], probs)?, ForwardCache { samples }))
}

/// Mean categorical cross-entropy of a batch and its gradient, computed with
/// dropout active.
pub fn loss_and_grad<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &ParameterSet,
    batch: &Tensor,
    labels: &[usize],
    rng: &mut R,
) -> Result<(f64, Gradients)> {
    let plan = prepare(spec, params)?;
    let n = check_batch(spec, batch)?;
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    let samples: Vec<&[f32]> = batch.data().chunks_exact(spec.input.len()).collect();
    batch_loss_and_grad(&plan, spec.classes, params, &samples, labels, rng)
}

/// Loss and gradient over borrowed samples; `plan` must come from a validated
/// spec that `params` matches.
pub(crate) fn batch_loss_and_grad<R: Rng + ?Sized>(
    plan: &[LayerPlan],
    classes: usize,
    params: &ParameterSet,
    samples: &[&[f32]],
    labels: &[usize],
    rng: &mut R,
) -> Result<(f64, Gradients)> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::data(format!("label {bad} outside [0, {classes})")));
    }
    let n = samples.len() as f32;
    let mut grads = Gradients::zeros_like(params);
    let mut loss = 0.0f64;
    for (sample, &label) in samples.iter().zip(labels) {
        let (probs, cache) = forward_sample(plan, params, sample, Mode::Train, rng, true)?;
        loss += f64::from(example_loss(&probs, label));
        let mut d_logits: Vec<f32> = probs.iter().map(|p| p / n).collect();
        d_logits[label] -= 1.0 / n;
        backward_sample(plan, params, &cache.unwrap(), d_logits, &mut grads);
    }
    Ok((loss / samples.len() as f64, grads))
}

fn example_loss(probs: &[f32], label: usize) -> f32 {
    -libm::logf(probs[label].max(LOG_CLAMP))
}

/// First index of the largest probability.
fn argmax(probs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Fraction of argmax predictions equal to the label.
    pub accuracy: f64,
    pub mean_loss: f64,
    pub correct: usize,
    pub count: usize,
}

/// Eval-mode accuracy and mean loss over a whole dataset.
pub fn evaluate(spec: &ModelSpec, params: &ParameterSet, dataset: &Dataset) -> Result<Evaluation> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    evaluate_subset(spec, params, dataset, &all)
}

/// Like [`evaluate`], restricted to `indices`.
pub fn evaluate_subset(
    spec: &ModelSpec,
    params: &ParameterSet,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::data("cannot evaluate on an empty dataset"));
    }
    let plan = prepare(spec, params)?;
    let mut correct = 0;
    let mut loss = 0.0f64;
    for &i in indices {
        let (probs, label) = predict(&plan, spec, params, dataset, i)?;
        loss += f64::from(example_loss(&probs, label));
        if argmax(&probs) == label {
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / indices.len() as f64,
        mean_loss: loss / indices.len() as f64,
        correct,
        count: indices.len(),
    })
}

/// Eval-mode loss of each example in `indices`, in order.
pub fn per_example_losses(
    spec: &ModelSpec,
    params: &ParameterSet,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Vec<f32>> {
    let plan = prepare(spec, params)?;
    indices
        .iter()
        .map(|&i| predict(&plan, spec, params, dataset, i).map(|(p, l)| example_loss(&p, l)))
        .collect()
}

fn predict(
    plan: &[LayerPlan],
    spec: &ModelSpec,
    params: &ParameterSet,
    dataset: &Dataset,
    index: usize,
) -> Result<(Vec<f32>, usize)> {
    let record = dataset
        .get(index)
        .ok_or_else(|| Error::data(format!("index {index} outside dataset of {}", dataset.len())))?;
    if record.pixels.len() != spec.input.len() {
        return Err(Error::shape(format!(
            "image {:?} does not match model input {:?}",
            record.pixels.shape(),
            spec.input
        )));
    }
    if record.label >= spec.classes {
        return Err(Error::data(format!("label {} outside [0, {})", record.label, spec.classes)));
    }
    let (probs, _) = forward_sample(plan, params, record.pixels.data(), Mode::Eval, &mut NoRng, false)?;
    Ok((probs, record.label))
}

/// Eval mode never draws; this keeps the signature uniform.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval-mode forward drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval-mode forward drew a random number")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("eval-mode forward drew a random number")
    }
}
