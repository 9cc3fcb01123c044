//! The three experiment topologies (centralized, federated with IID
//! clients, federated with single-source clients), early stopping, the
//! learning-rate grid and client-count sweeps.

mod config;
mod runner;
mod search;

pub use config::{EarlyStopping, ExperimentConfig, Topology, DEFAULT_LEARNING_RATES};
pub use runner::{
    drive_epochs, early_stop_check, run_centralized, run_experiment, run_federated, History, Observer,
    Runtime, StopReason,
};
pub use search::{client_sweep, grid_search, GridResult};
