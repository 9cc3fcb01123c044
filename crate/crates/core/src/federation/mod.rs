//! FedAvg: clients train locally from the current global weights, the
//! server replaces the global weights with the sample-weighted mean of the
//! client results, and every client is then synchronized to the new global
//! model.

mod aggregate;
mod client;
mod objective;
mod round;
pub mod wire;

pub use aggregate::fedavg_aggregate;
pub use client::{local_training, sgd_epoch, ClientState, LocalUpdate, TrainingContext};
pub use objective::global_objective;
pub use round::{ClientExecutor, Clock, FedAvgConfig, GlobalState, NullClock, RoundRecord, SerialExecutor};
pub use wire::{decode_parameter_message, encode_parameter_message, ParameterMessage};
