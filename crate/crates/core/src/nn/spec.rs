use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One layer of a sequential model. Convolutions are 3×3, stride 1, SAME
/// zero padding; pooling is 2×2 with stride 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Conv { filters: usize },
    MaxPool,
    Relu,
    Dropout { rate: f32 },
    Flatten,
    Dense { units: usize },
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputShape {
    pub const fn square(side: usize, channels: usize) -> Self {
        InputShape { height: side, width: side, channels }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Activation layout between two layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dims {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl Dims {
    pub fn len(&self) -> usize {
        match *self {
            Dims::Spatial { h, w, c } => h * w * c,
            Dims::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated layer with resolved input/output dims. `param` is the index of
/// the layer's entry in the [`ParameterSet`](super::ParameterSet), if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerPlan {
    pub kind: LayerKind,
    pub input: Dims,
    pub output: Dims,
    pub param: Option<usize>,
}

impl LayerPlan {
    /// Shapes of the (weight, bias) pair for parameterized layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match (self.kind, self.input) {
            (LayerKind::Conv { filters }, Dims::Spatial { c, .. }) => {
                Some((vec![3, 3, c, filters], vec![filters]))
            }
            (LayerKind::Dense { units }, Dims::Flat(n)) => Some((vec![n, units], vec![units])),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match (self.kind, self.input) {
            (LayerKind::Conv { .. }, Dims::Spatial { c, .. }) => 9 * c,
            (LayerKind::Dense { .. }, Dims::Flat(n)) => n,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input: InputShape,
    pub classes: usize,
    pub layers: Vec<LayerKind>,
}

impl ModelSpec {
    pub fn new(input: InputShape, classes: usize, layers: Vec<LayerKind>) -> Self {
        ModelSpec { input, classes, layers }
    }

    /// The default classifier: 128×128 RGB input, 11 classes, conv widths
    /// 32/32/64/64 and a 128-unit hidden dense layer.
    pub fn standard() -> Self {
        Self::with_widths(128, 11, [32, 32, 64, 64], 128)
    }

    /// Same topology as [`standard`](Self::standard) with custom resolution
    /// and widths:
    ///
    /// conv-relu-pool ×3, conv-relu, dropout 0.25, flatten, dense-relu,
    /// dropout 0.5, dense(classes), softmax.
    pub fn with_widths(side: usize, classes: usize, conv: [usize; 4], dense: usize) -> Self {
        use LayerKind::*;
        ModelSpec {
            input: InputShape::square(side, 3),
            classes,
            layers: vec![
                Conv { filters: conv[0] },
                Relu,
                MaxPool,
                Conv { filters: conv[1] },
                Relu,
                MaxPool,
                Conv { filters: conv[2] },
                Relu,
                MaxPool,
                Conv { filters: conv[3] },
                Relu,
                Dropout { rate: 0.25 },
                Flatten,
                Dense { units: dense },
                Relu,
                Dropout { rate: 0.5 },
                Dense { units: classes },
                Softmax,
            ],
        }
    }

    /// Resolves and validates layer dimensions.
    pub fn plan(&self) -> Result<Vec<LayerPlan>> {
        if self.input.is_empty() {
            return Err(Error::config("input shape has a zero dimension"));
        }
        if self.classes < 2 {
            return Err(Error::config(format!("need at least 2 classes, got {}", self.classes)));
        }
        let mut dims = Dims::Spatial {
            h: self.input.height,
            w: self.input.width,
            c: self.input.channels,
        };
        let mut plans = Vec::with_capacity(self.layers.len());
        let mut n_params = 0;
        for (i, &kind) in self.layers.iter().enumerate() {
            let output = match (kind, dims) {
                (LayerKind::Conv { filters }, Dims::Spatial { h, w, .. }) => {
                    if filters == 0 {
                        return Err(Error::config(format!("layer {i}: conv with zero filters")));
                    }
                    Dims::Spatial { h, w, c: filters }
                }
                (LayerKind::MaxPool, Dims::Spatial { h, w, c }) => {
                    if h < 2 || w < 2 {
                        return Err(Error::config(format!(
                            "layer {i}: maxpool needs at least 2×2 input, got {h}×{w}"
                        )));
                    }
                    Dims::Spatial { h: h / 2, w: w / 2, c }
                }
                (LayerKind::Flatten, Dims::Spatial { .. }) => Dims::Flat(dims.len()),
                (LayerKind::Dense { units }, Dims::Flat(_)) => {
                    if units == 0 {
                        return Err(Error::config(format!("layer {i}: dense with zero units")));
                    }
                    Dims::Flat(units)
                }
                (LayerKind::Relu, d) => d,
                (LayerKind::Dropout { rate }, d) => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::config(format!(
                            "layer {i}: dropout rate {rate} outside [0, 1)"
                        )));
                    }
                    d
                }
                (LayerKind::Softmax, Dims::Flat(n)) => Dims::Flat(n),
                (kind, d) => {
                    return Err(Error::config(format!(
                        "layer {i}: {kind:?} cannot follow activations of shape {d:?}"
                    )));
                }
            };
            let param = match kind {
                LayerKind::Conv { .. } | LayerKind::Dense { .. } => {
                    n_params += 1;
                    Some(n_params - 1)
                }
                _ => None,
            };
            plans.push(LayerPlan { kind, input: dims, output, param });
            dims = output;
        }
        match self.layers.last() {
            Some(LayerKind::Softmax) => {}
            _ => return Err(Error::config("model must end with a softmax layer")),
        }
        if self.layers[..self.layers.len() - 1].contains(&LayerKind::Softmax) {
            return Err(Error::config("softmax is only allowed as the final layer"));
        }
        if dims != Dims::Flat(self.classes) {
            return Err(Error::config(format!(
                "model output {dims:?} does not match {} classes",
                self.classes
            )));
        }
        Ok(plans)
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self
            .plan()?
            .iter()
            .filter_map(LayerPlan::param_shapes)
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum())
    }
}
