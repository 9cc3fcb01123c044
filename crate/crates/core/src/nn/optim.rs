use super::params::{AsLayers, Gradients, ParameterSet};
use crate::error::{Error, Result};

/// Plain SGD, in place: `w ← w − η·g` for every scalar.
pub fn apply_sgd(params: &mut ParameterSet, grads: &Gradients, lr: f32) -> Result<()> {
    if !params.congruent(grads) {
        return Err(Error::shape("gradients are not congruent with the parameters"));
    }
    for (p, g) in params.layers_mut().iter_mut().zip(grads.as_layers()) {
        for (w, &d) in p.weight.data_mut().iter_mut().zip(g.weight.data()) {
            *w -= lr * d;
        }
        for (b, &d) in p.bias.data_mut().iter_mut().zip(g.bias.data()) {
            *b -= lr * d;
        }
    }
    Ok(())
}

/// Returns the parameters after one SGD step.
pub fn sgd_step(params: &ParameterSet, grads: &Gradients, lr: f32) -> Result<ParameterSet> {
    let mut next = params.clone();
    apply_sgd(&mut next, grads, lr)?;
    Ok(next)
}
