use alloc::format;

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::nn::{per_example_losses, ModelSpec, ParameterSet};

/// Federated objective `f(w) = Σ_k (n_k / n) · F_k(w)` where `F_k` is the
/// mean eval-mode loss over partition `k`.
pub fn global_objective(
    spec: &ModelSpec,
    params: &ParameterSet,
    data: &Dataset,
    partitions: &[Partition],
) -> Result<f64> {
    if partitions.is_empty() {
        return Err(Error::data("no partitions"));
    }
    let n: usize = partitions.iter().map(Partition::len).sum();
    let mut total = 0.0;
    for p in partitions {
        if p.is_empty() {
            return Err(Error::data(format!("partition of client {} is empty", p.client)));
        }
        let losses = per_example_losses(spec, params, data, &p.indices)?;
        let local_mean = losses.iter().map(|&l| f64::from(l)).sum::<f64>() / p.len() as f64;
        total += p.len() as f64 / n as f64 * local_mean;
    }
    Ok(total)
}
