//! Metrics CSV: one row per epoch or round.

use std::io::Write;
use std::path::Path;

use fedsim_core::experiments::History;

use crate::error::{AppError, Result};

pub const HEADER: [&str; 8] = ["topology", "lr", "clients", "round", "train_loss", "test_accuracy", "seconds", "stop_reason"];

/// Rows of one run. The stop reason is filled on the final row only.
pub fn history_rows(h: &History) -> Vec<[String; 8]> {
    let last = h.records.len().saturating_sub(1);
    h.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            [
                h.config.topology.to_string(),
                h.config.lr.to_string(),
                h.config.clients.to_string(),
                r.round.to_string(),
                format!("{:.6}", r.train_loss),
                format!("{:.6}", r.test_accuracy),
                format!("{:.3}", r.seconds),
                if i == last { h.stop_reason.as_str().to_string() } else { String::new() },
            ]
        })
        .collect()
}

pub fn write_metrics_to<W: Write>(out: W, histories: &[&History]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for h in histories {
        for row in history_rows(h) {
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn metrics_csv(histories: &[&History]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_metrics_to(&mut buf, histories).expect("writing to memory");
    buf
}

pub fn write_metrics(path: &Path, histories: &[&History]) -> Result<()> {
    std::fs::write(path, metrics_csv(histories)).map_err(|e| AppError::io(path, e))
}

/// Writes a small table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| AppError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}
