//! Core of a deterministic federated-learning simulator.
//!
//! Everything in this crate is pure computation over in-memory data and runs
//! under `no_std` with `alloc`:
//!
//! - [`nn`]: a small tensor engine with hand-written backpropagation, plain
//!   SGD, and the CNN used for the image classification experiments.
//! - [`data`]: labelled image datasets, a synthetic generator, resizing,
//!   augmentation, stratified splitting and client partitioning.
//! - [`federation`]: client local training, FedAvg aggregation, the weighted
//!   global objective, round execution and the parameter exchange wire format.
//! - [`experiments`]: centralized / federated / mutually-exclusive runs,
//!   early stopping, learning-rate grid search and client-count sweeps.
//!
//! IO, image decoding, configuration files and the command line live in the
//! companion `fedsim` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![warn(elided_lifetimes_in_paths)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod experiments;
pub mod federation;
pub mod nn;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
