use alloc::format;
use alloc::vec::Vec;

use super::config::{EarlyStopping, ExperimentConfig, Topology};
use crate::data::{partition_by_source, partition_iid, Dataset};
use crate::error::{Error, Result};
use crate::federation::{
    sgd_epoch, ClientExecutor, Clock, GlobalState, NullClock, RoundRecord, SerialExecutor, TrainingContext,
};
use crate::nn::{evaluate, init_parameters, ParameterSet};
use crate::rng::{client_rng, derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Cap,
    EarlyStop,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Cap => "cap",
            StopReason::EarlyStop => "early-stop",
        }
    }
}

/// The per-epoch (or per-round) record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub config: ExperimentConfig,
    pub records: Vec<RoundRecord>,
    pub stop_reason: StopReason,
    pub final_params: ParameterSet,
}

impl History {
    /// Test accuracy after the last epoch/round.
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.test_accuracy)
    }
}

/// Called after every epoch/round with the record and the new global weights.
pub type Observer<'a> = &'a mut dyn FnMut(&RoundRecord, &ParameterSet);

/// Execution services for a run.
pub struct Runtime<'a> {
    pub executor: &'a dyn ClientExecutor,
    pub clock: &'a dyn Clock,
    pub observer: Option<Observer<'a>>,
}

impl Runtime<'_> {
    /// Serial client execution, zero timings, no observer.
    pub fn serial() -> Runtime<'static> {
        Runtime { executor: &SerialExecutor, clock: &NullClock, observer: None }
    }

    fn observe(&mut self, record: &RoundRecord, params: &ParameterSet) {
        if let Some(obs) = self.observer.as_mut() {
            obs(record, params);
        }
    }
}

/// True when more than `min_epochs` epochs are recorded and the last two
/// accuracies differ by less than `delta`. The change is first measured on
/// the epoch following the minimum, so a flat accuracy stream stops after
/// `min_epochs + 1` epochs.
pub fn early_stop_check(records: &[RoundRecord], policy: EarlyStopping) -> bool {
    match records {
        [.., prev, last] if records.len() > policy.min_epochs => {
            (last.test_accuracy - prev.test_accuracy).abs() < policy.delta
        }
        _ => false,
    }
}

/// Runs `epoch(1)`, `epoch(2)`, … until `cap` records exist or the early-stop
/// policy fires.
pub fn drive_epochs(
    cap: usize,
    policy: Option<EarlyStopping>,
    mut epoch: impl FnMut(u32) -> Result<RoundRecord>,
) -> Result<(Vec<RoundRecord>, StopReason)> {
    let mut records = Vec::with_capacity(cap);
    for e in 1..=cap {
        records.push(epoch(e as u32)?);
        if policy.is_some_and(|p| early_stop_check(&records, p)) {
            return Ok((records, StopReason::EarlyStop));
        }
    }
    Ok((records, StopReason::Cap))
}

fn initial_params(cfg: &ExperimentConfig) -> Result<ParameterSet> {
    init_parameters(&cfg.model, derive_seed(cfg.seed, &[stream::INIT]))
}

/// Centralized training on the full training set: one shuffled mini-batch
/// SGD pass per epoch, evaluated on `test` after each epoch, for at most
/// `cfg.rounds` epochs with optional early stopping.
pub fn run_centralized(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    rt: &mut Runtime<'_>,
) -> Result<History> {
    if cfg.topology != Topology::Centralized {
        return Err(Error::config(format!("run_centralized called with topology {}", cfg.topology)));
    }
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::data("empty training set"));
    }
    let ctx = TrainingContext::new(&cfg.model, train)?;
    let mut params = initial_params(cfg)?;
    let all: Vec<usize> = (0..train.len()).collect();
    let (records, stop_reason) = drive_epochs(cfg.rounds, cfg.early_stop, |epoch| {
        let start = rt.clock.now();
        // Same stream as client 0 in round `epoch - 1`.
        let mut rng = client_rng(cfg.seed, 0, epoch - 1);
        let (loss, batches) = sgd_epoch(&ctx, &mut params, &all, cfg.batch_size, cfg.lr, &mut rng)?;
        let eval = evaluate(&cfg.model, &params, test)?;
        let record = RoundRecord {
            round: epoch,
            test_accuracy: eval.accuracy,
            train_loss: loss / batches as f64,
            seconds: rt.clock.now() - start,
        };
        rt.observe(&record, &params);
        Ok(record)
    })?;
    Ok(History { config: cfg.clone(), records, stop_reason, final_params: params })
}

/// Federated training for exactly `cfg.rounds` rounds. Clients are built by
/// IID dealing (`Federated`) or by source (`MutuallyExclusive`).
pub fn run_federated(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    rt: &mut Runtime<'_>,
) -> Result<History> {
    cfg.validate()?;
    let partitions = match cfg.topology {
        Topology::Federated => partition_iid(train, cfg.clients, cfg.seed)?,
        Topology::MutuallyExclusive => partition_by_source(train, cfg.clients)?,
        Topology::Centralized => {
            return Err(Error::config("run_federated needs topology fl or mefl"));
        }
    };
    let ctx = TrainingContext::new(&cfg.model, train)?;
    let fedavg = cfg.fedavg();
    let mut state = GlobalState::new(initial_params(cfg)?, partitions, cfg.seed)?;
    let mut records = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let record = state.run_round(&ctx, &fedavg, test, rt.executor, rt.clock)?;
        rt.observe(&record, &state.params);
        records.push(record);
    }
    Ok(History { config: cfg.clone(), records, stop_reason: StopReason::Cap, final_params: state.params })
}

/// Dispatches on `cfg.topology`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    rt: &mut Runtime<'_>,
) -> Result<History> {
    match cfg.topology {
        Topology::Centralized => run_centralized(cfg, train, test, rt),
        _ => run_federated(cfg, train, test, rt),
    }
}
