//! Run manifest (JSON) and checkpoint files.

use std::path::{Path, PathBuf};

use fedsim_core::experiments::History;
use fedsim_core::federation::{decode_parameter_message, encode_parameter_message, ParameterMessage};
use fedsim_core::nn::ParameterSet;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub topology: String,
    pub lr: f32,
    pub clients: usize,
    pub epochs: usize,
    pub final_accuracy: f64,
    pub stop_reason: String,
}

impl RunSummary {
    pub fn of(h: &History) -> Self {
        RunSummary {
            topology: h.config.topology.to_string(),
            lr: h.config.lr,
            clients: h.config.clients,
            epochs: h.records.len(),
            final_accuracy: h.final_accuracy(),
            stop_reason: h.stop_reason.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub config: PathBuf,
    pub metrics_csv: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

/// Everything needed to repeat a run: the resolved config (also written as a
/// config file) and a hash of the data it consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: String,
    pub data_fingerprint: String,
    pub train_size: usize,
    pub test_size: usize,
    pub warnings: Vec<String>,
    pub runs: Vec<RunSummary>,
    pub artifacts: Artifacts,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(|e| AppError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
    }
}

pub fn write_checkpoint(path: &Path, round: u32, samples: u64, params: &ParameterSet) -> Result<()> {
    let msg = ParameterMessage::checkpoint(round, samples, params)?;
    std::fs::write(path, encode_parameter_message(&msg)).map_err(|e| AppError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ParameterMessage> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_parameter_message(&bytes).map_err(|source| AppError::Checkpoint { path: path.to_path_buf(), source })
}
