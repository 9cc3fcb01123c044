use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::federation::FedAvgConfig;
use crate::nn::ModelSpec;

/// The grid searched by default.
pub const DEFAULT_LEARNING_RATES: [f32; 3] = [0.001, 0.0001, 0.0005];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    /// All data pooled on one server.
    Centralized,
    /// Pooled data shuffled and dealt to clients.
    Federated,
    /// Each client holds data from a single source.
    MutuallyExclusive,
}

impl Topology {
    /// Allowed client counts.
    pub fn client_range(self) -> core::ops::RangeInclusive<usize> {
        match self {
            Topology::Centralized => 1..=1,
            Topology::Federated => 1..=10,
            Topology::MutuallyExclusive => 2..=10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Centralized => "cl",
            Topology::Federated => "fl",
            Topology::MutuallyExclusive => "mefl",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cl" | "centralized" => Ok(Topology::Centralized),
            "fl" | "federated" => Ok(Topology::Federated),
            "mefl" | "me-fl" | "mutually-exclusive" => Ok(Topology::MutuallyExclusive),
            other => Err(Error::config(format!("unknown topology {other:?} (expected cl, fl or mefl)"))),
        }
    }
}

/// Training stops once at least `min_epochs` epochs have completed and the
/// latest epoch changed test accuracy by less than `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopping {
    pub min_epochs: usize,
    pub delta: f64,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping { min_epochs: 50, delta: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub clients: usize,
    pub lr: f32,
    /// Epoch cap for centralized runs, exact round count for federated ones.
    pub rounds: usize,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub seed: u64,
    /// Centralized runs only; `None` disables early stopping.
    pub early_stop: Option<EarlyStopping>,
    pub model: ModelSpec,
}

impl ExperimentConfig {
    pub fn new(topology: Topology, model: ModelSpec) -> Self {
        ExperimentConfig {
            topology,
            clients: if topology == Topology::MutuallyExclusive { 2 } else { 1 },
            lr: 1e-4,
            rounds: 75,
            batch_size: 8,
            local_epochs: 1,
            seed: 0,
            early_stop: Some(EarlyStopping::default()),
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.topology.client_range().contains(&self.clients) {
            let r = self.topology.client_range();
            return Err(Error::config(format!(
                "{} needs between {} and {} clients, got {}",
                self.topology,
                r.start(),
                r.end(),
                self.clients
            )));
        }
        if self.early_stop.is_some_and(|e| e.delta.is_nan() || e.delta < 0.0) {
            return Err(Error::config("early-stop delta must be non-negative"));
        }
        self.fedavg().validate()?;
        self.model.plan().map(|_| ())
    }

    pub fn fedavg(&self) -> FedAvgConfig {
        FedAvgConfig {
            clients: self.clients,
            batch_size: self.batch_size,
            local_epochs: self.local_epochs,
            lr: self.lr,
            rounds: self.rounds,
            seed: self.seed,
        }
    }
}
