//! Std companion to `fedsim-core`: configuration files, image-folder ingest,
//! metrics CSV, run manifests, checkpoint files, a thread-pool client
//! executor and the `fedsim` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod manifest;
pub mod metrics;
pub mod pipeline;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{AppError, Result};
