use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::tensor::Tensor;

/// Weight and bias of one parameterized layer; `layer` is its index in
/// [`ModelSpec::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayer {
    pub layer: usize,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Model weights in layer order. Only conv and dense layers carry entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    layers: Vec<ParamLayer>,
}

/// Same structure as the [`ParameterSet`] it was computed against.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<ParamLayer>,
}

macro_rules! layered {
    ($ty:ident) => {
        impl $ty {
            pub fn from_layers(layers: Vec<ParamLayer>) -> Self {
                $ty { layers }
            }

            pub fn layers(&self) -> &[ParamLayer] {
                &self.layers
            }

            pub fn layers_mut(&mut self) -> &mut [ParamLayer] {
                &mut self.layers
            }

            pub fn into_layers(self) -> Vec<ParamLayer> {
                self.layers
            }

            /// Total scalar count over all weights and biases.
            pub fn scalar_count(&self) -> usize {
                self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
            }

            /// Weight then bias for each layer.
            pub fn tensors(&self) -> impl Iterator<Item = &Tensor> + '_ {
                self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
            }

            pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> + '_ {
                self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
            }

            /// All scalars flattened in [`tensors`](Self::tensors) order.
            pub fn flat(&self) -> Vec<f32> {
                let mut out = Vec::with_capacity(self.scalar_count());
                for t in self.tensors() {
                    out.extend_from_slice(t.data());
                }
                out
            }

            /// True when layer ids and every tensor shape agree.
            pub fn congruent<T: AsLayers>(&self, other: &T) -> bool {
                let other = other.as_layers();
                self.layers.len() == other.len()
                    && self.layers.iter().zip(other).all(|(a, b)| {
                        a.layer == b.layer
                            && a.weight.same_shape(&b.weight)
                            && a.bias.same_shape(&b.bias)
                    })
            }
        }

        impl AsLayers for $ty {
            fn as_layers(&self) -> &[ParamLayer] {
                &self.layers
            }
        }
    };
}

/// Shared view over [`ParameterSet`] and [`Gradients`].
pub trait AsLayers {
    fn as_layers(&self) -> &[ParamLayer];
}

layered!(ParameterSet);
layered!(Gradients);

impl ParameterSet {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        let mut layers = Vec::new();
        for (i, plan) in spec.plan()?.iter().enumerate() {
            if let Some((w, b)) = plan.param_shapes() {
                layers.push(ParamLayer { layer: i, weight: Tensor::zeros(&w), bias: Tensor::zeros(&b) });
            }
        }
        Ok(ParameterSet { layers })
    }

    /// Fails unless layer ids and shapes match `spec` exactly.
    pub fn check_spec(&self, spec: &ModelSpec) -> Result<()> {
        let expected = ParameterSet::zeros(spec)?;
        if expected.congruent(self) {
            Ok(())
        } else {
            Err(Error::shape("parameter set does not match the model spec"))
        }
    }

    /// Rebuilds a parameter set for `spec` from flat scalars in
    /// [`tensors`](Self::tensors) order.
    pub fn from_flat(spec: &ModelSpec, values: &[f32]) -> Result<Self> {
        let mut params = ParameterSet::zeros(spec)?;
        if values.len() != params.scalar_count() {
            return Err(Error::shape(format!(
                "expected {} scalars, got {}",
                params.scalar_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for t in params.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(params)
    }
}

impl Gradients {
    pub fn zeros_like(params: &ParameterSet) -> Self {
        Gradients {
            layers: params
                .layers()
                .iter()
                .map(|l| ParamLayer {
                    layer: l.layer,
                    weight: Tensor::zeros(l.weight.shape()),
                    bias: Tensor::zeros(l.bias.shape()),
                })
                .collect(),
        }
    }
}

/// Fan-in-scaled uniform initialization: weights ~ U(−√(6/fan_in), √(6/fan_in)),
/// biases zero. Deterministic in `seed`.
pub fn init_parameters(spec: &ModelSpec, seed: u64) -> Result<ParameterSet> {
    use rand::SeedableRng;
    let plan = spec.plan()?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut params = ParameterSet::zeros(spec)?;
    for layer in params.layers_mut() {
        let bound = init_bound(plan[layer.layer].fan_in());
        for w in layer.weight.data_mut() {
            *w = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}

pub(crate) fn init_bound(fan_in: usize) -> f32 {
    libm::sqrtf(6.0 / fan_in as f32)
}
