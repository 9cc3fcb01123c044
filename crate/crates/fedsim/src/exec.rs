//! Parallel client execution and wall-clock timing.

use std::time::Instant;

use fedsim_core::federation::{local_training, ClientExecutor, ClientState, Clock, FedAvgConfig, LocalUpdate, TrainingContext};
use fedsim_core::nn::ParameterSet;
use fedsim_core::Result;
use rayon::prelude::*;

/// Trains the clients of a round on the rayon pool. Results come back in
/// client order and aggregation is order-fixed, so the outcome is identical
/// to serial execution.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl ClientExecutor for RayonExecutor {
    fn train_clients(
        &self,
        ctx: &TrainingContext<'_>,
        clients: &[ClientState],
        global: &ParameterSet,
        cfg: &FedAvgConfig,
        round: u32,
    ) -> Vec<Result<LocalUpdate>> {
        clients
            .par_iter()
            .map(|c| local_training(ctx, c, global, cfg.batch_size, cfg.local_epochs, cfg.lr, round))
            .collect()
    }
}

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
