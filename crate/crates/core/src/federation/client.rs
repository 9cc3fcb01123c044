use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::nn::{apply_sgd, LayerPlan, ModelSpec, ParameterSet};
use crate::rng::{client_rng, SimRng};

/// Model and training data shared by every client of a run.
#[derive(Debug, Clone)]
pub struct TrainingContext<'a> {
    pub spec: &'a ModelSpec,
    plan: Vec<LayerPlan>,
    pub train: &'a Dataset,
}

impl<'a> TrainingContext<'a> {
    pub fn new(spec: &'a ModelSpec, train: &'a Dataset) -> Result<Self> {
        let plan = spec.plan()?;
        if let Some((h, w)) = train.image_dims() {
            if h != spec.input.height || w != spec.input.width || spec.input.channels != 3 {
                return Err(Error::shape(format!(
                    "training images are {h}×{w}×3 but the model expects {:?}",
                    spec.input
                )));
            }
        }
        if train.n_classes() != spec.classes {
            return Err(Error::config(format!(
                "dataset has {} classes, model has {}",
                train.n_classes(),
                spec.classes
            )));
        }
        Ok(TrainingContext { spec, plan, train })
    }
}

/// A participant: its shard, its copy of the weights, and the master seed
/// its per-round random streams are derived from.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: u32,
    pub partition: Partition,
    pub params: ParameterSet,
    pub master_seed: u64,
}

/// The outcome of one client's local training.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub client: u32,
    pub params: ParameterSet,
    pub n_k: usize,
    /// Mean batch loss over all local steps (0 when no step ran).
    pub mean_loss: f64,
}

/// One pass over `indices` (shuffled with `rng`) in mini-batches of
/// `batch_size`, applying an SGD step per batch. The final short batch is
/// kept. Returns the summed batch loss and the batch count.
pub fn sgd_epoch(
    ctx: &TrainingContext<'_>,
    params: &mut ParameterSet,
    indices: &[usize],
    batch_size: usize,
    lr: f32,
    rng: &mut SimRng,
) -> Result<(f64, usize)> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut order = indices.to_vec();
    // Order depends only on the set of indices, not on how it was built.
    order.sort_unstable();
    order.shuffle(rng);
    let records = ctx.train.records();
    let mut loss_sum = 0.0;
    let mut batches = 0;
    for batch in order.chunks(batch_size) {
        let samples: Vec<&[f32]> = batch.iter().map(|&i| records[i].pixels.data()).collect();
        let labels: Vec<usize> = batch.iter().map(|&i| records[i].label).collect();
        let (loss, grads) = crate::nn::batch_loss_and_grad(
            &ctx.plan,
            ctx.spec.classes,
            params,
            &samples,
            &labels,
            rng,
        )?;
        apply_sgd(params, &grads, lr)?;
        loss_sum += loss;
        batches += 1;
    }
    Ok((loss_sum, batches))
}

/// Local training of one client in `round`: starting from `global`, run
/// `local_epochs` shuffled mini-batch SGD passes over the client's shard.
pub fn local_training(
    ctx: &TrainingContext<'_>,
    client: &ClientState,
    global: &ParameterSet,
    batch_size: usize,
    local_epochs: usize,
    lr: f32,
    round: u32,
) -> Result<LocalUpdate> {
    if client.partition.is_empty() {
        return Err(Error::data(format!("client {} has an empty partition", client.id)));
    }
    if let Some(&bad) = client.partition.indices.iter().find(|&&i| i >= ctx.train.len()) {
        return Err(Error::data(format!("client {}: index {bad} outside training set", client.id)));
    }
    let mut params = global.clone();
    let mut rng = client_rng(client.master_seed, client.id, round);
    let (mut loss, mut batches) = (0.0, 0);
    for _ in 0..local_epochs {
        let (l, b) = sgd_epoch(ctx, &mut params, &client.partition.indices, batch_size, lr, &mut rng)?;
        loss += l;
        batches += b;
    }
    Ok(LocalUpdate {
        client: client.id,
        params,
        n_k: client.partition.len(),
        mean_loss: if batches > 0 { loss / batches as f64 } else { 0.0 },
    })
}
