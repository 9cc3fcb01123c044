use alloc::format;
use alloc::vec::Vec;

use super::config::{ExperimentConfig, Topology};
use super::runner::History;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best_lr: f32,
    /// One history per learning rate, in grid order.
    pub histories: Vec<(f32, History)>,
}

/// Runs `run` once per learning rate (same seed) and picks the rate with the
/// highest final test accuracy; ties go to the smaller rate.
pub fn grid_search<F>(cfg: &ExperimentConfig, lrs: &[f32], mut run: F) -> Result<GridResult>
where
    F: FnMut(&ExperimentConfig) -> Result<History>,
{
    if lrs.is_empty() {
        return Err(Error::config("learning-rate grid is empty"));
    }
    let mut histories = Vec::with_capacity(lrs.len());
    for &lr in lrs {
        let mut c = cfg.clone();
        c.lr = lr;
        histories.push((lr, run(&c)?));
    }
    let (best_lr, _) = histories
        .iter()
        .map(|(lr, h)| (*lr, h.final_accuracy()))
        .reduce(|best, cand| {
            if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                cand
            } else {
                best
            }
        })
        .expect("non-empty grid");
    Ok(GridResult { best_lr, histories })
}

/// One run per client count, returning `(K, final accuracy)` pairs in the
/// order of `ks`.
pub fn client_sweep<F>(cfg: &ExperimentConfig, topology: Topology, ks: &[usize], mut run: F) -> Result<Vec<(usize, f64)>>
where
    F: FnMut(&ExperimentConfig) -> Result<History>,
{
    if topology == Topology::Centralized {
        return Err(Error::config("client sweeps need a federated topology"));
    }
    let range = topology.client_range();
    if let Some(bad) = ks.iter().find(|k| !range.contains(k)) {
        return Err(Error::config(format!(
            "{topology} sweep needs K in {}..={}, got {bad}",
            range.start(),
            range.end()
        )));
    }
    ks.iter()
        .map(|&k| {
            let mut c = cfg.clone();
            c.topology = topology;
            c.clients = k;
            run(&c).map(|h| (k, h.final_accuracy()))
        })
        .collect()
}
