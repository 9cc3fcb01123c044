//! Minimal CNN engine: layer kernels, forward/backward passes over a
//! [`ModelSpec`], categorical cross-entropy, SGD and evaluation.

mod kernels;
mod model;
mod optim;
mod params;
mod spec;

pub use kernels::{conv2d, maxpool2};
pub use model::{
    evaluate, evaluate_subset, forward, loss_and_grad, per_example_losses, Evaluation,
    ForwardCache, Mode, LOG_CLAMP,
};
pub use optim::{apply_sgd, sgd_step};
pub(crate) use model::batch_loss_and_grad;
pub use params::{init_parameters, Gradients, ParamLayer, ParameterSet};
pub use spec::{Dims, InputShape, LayerKind, LayerPlan, ModelSpec};
