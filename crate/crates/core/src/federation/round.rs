use alloc::format;
use alloc::vec::Vec;

use super::aggregate::fedavg_aggregate;
use super::client::{local_training, ClientState, LocalUpdate, TrainingContext};
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::nn::{evaluate, ParameterSet};

/// FedAvg hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedAvgConfig {
    pub clients: usize,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub lr: f32,
    pub rounds: usize,
    pub seed: u64,
}

impl Default for FedAvgConfig {
    fn default() -> Self {
        FedAvgConfig { clients: 1, batch_size: 8, local_epochs: 1, lr: 1e-4, rounds: 75, seed: 0 }
    }
}

impl FedAvgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("clients must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Metrics of one round (or one centralized epoch).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: u32,
    /// Global model accuracy on the held-out test set.
    pub test_accuracy: f64,
    /// Mean over clients of each client's mean batch loss.
    pub train_loss: f64,
    pub seconds: f64,
}

/// Source of elapsed time for [`RoundRecord::seconds`].
pub trait Clock {
    /// Seconds since an arbitrary fixed origin.
    fn now(&self) -> f64;
}

/// Always reports zero; makes records independent of wall time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Runs local training for every client of a round. Implementations must
/// return results in client order.
pub trait ClientExecutor {
    fn train_clients(
        &self,
        ctx: &TrainingContext<'_>,
        clients: &[ClientState],
        global: &ParameterSet,
        cfg: &FedAvgConfig,
        round: u32,
    ) -> Vec<Result<LocalUpdate>>;
}

/// Trains clients one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl ClientExecutor for SerialExecutor {
    fn train_clients(
        &self,
        ctx: &TrainingContext<'_>,
        clients: &[ClientState],
        global: &ParameterSet,
        cfg: &FedAvgConfig,
        round: u32,
    ) -> Vec<Result<LocalUpdate>> {
        clients
            .iter()
            .map(|c| local_training(ctx, c, global, cfg.batch_size, cfg.local_epochs, cfg.lr, round))
            .collect()
    }
}

/// Server state: the round counter, the global weights and the registered
/// clients.
#[derive(Debug, Clone)]
pub struct GlobalState {
    /// Number of completed rounds.
    pub round: u32,
    pub params: ParameterSet,
    pub clients: Vec<ClientState>,
}

impl GlobalState {
    /// Registers one client per partition, each starting from `initial`.
    pub fn new(initial: ParameterSet, partitions: Vec<Partition>, master_seed: u64) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::config("no clients"));
        }
        let clients = partitions
            .into_iter()
            .map(|partition| ClientState {
                id: partition.client,
                partition,
                params: initial.clone(),
                master_seed,
            })
            .collect();
        Ok(GlobalState { round: 0, params: initial, clients })
    }

    /// One FedAvg round: local training on every client from the current
    /// global weights, weighted aggregation, synchronization of all clients
    /// to the new weights, and evaluation on `test`.
    ///
    /// Any client failure aborts the round and leaves the state untouched.
    pub fn run_round(
        &mut self,
        ctx: &TrainingContext<'_>,
        cfg: &FedAvgConfig,
        test: &Dataset,
        executor: &dyn ClientExecutor,
        clock: &dyn Clock,
    ) -> Result<RoundRecord> {
        let start = clock.now();
        let updates = executor
            .train_clients(ctx, &self.clients, &self.params, cfg, self.round)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        if updates.len() != self.clients.len() {
            return Err(Error::protocol(format!(
                "executor returned {} updates for {} clients",
                updates.len(),
                self.clients.len()
            )));
        }
        let weighted: Vec<(usize, &ParameterSet)> = updates.iter().map(|u| (u.n_k, &u.params)).collect();
        let next = fedavg_aggregate(&weighted)?;
        let eval = evaluate(ctx.spec, &next, test)?;
        let train_loss = updates.iter().map(|u| u.mean_loss).sum::<f64>() / updates.len() as f64;

        for client in &mut self.clients {
            client.params.clone_from(&next);
        }
        self.params = next;
        self.round += 1;
        Ok(RoundRecord {
            round: self.round,
            test_accuracy: eval.accuracy,
            train_loss,
            seconds: clock.now() - start,
        })
    }

    /// Largest coordinate difference between any client and the global model.
    pub fn max_client_divergence(&self) -> f32 {
        self.clients
            .iter()
            .flat_map(|c| c.params.tensors().zip(self.params.tensors()).map(|(a, b)| a.max_abs_diff(b)))
            .fold(0.0, f32::max)
    }
}
