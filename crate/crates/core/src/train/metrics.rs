//! Per-epoch metrics and their CSV form.
//!
//! Floats are written with Rust's shortest round-trip formatting, which is
//! locale independent and parses back to the identical value. Per-layer
//! counts are joined with `;`. Wall-clock time goes to a separate file so
//! that the metrics file of a seeded run is reproducible byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result, SnnError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// Percent, measured on the training batches before each update.
    pub train_acc: f64,
    pub test_acc: f64,
    pub compression: f64,
    /// Units with at least one alive synapse, per weighted layer.
    pub alive_units: Vec<usize>,
    /// Units in the pruned set, per weighted layer.
    pub pruned_units: Vec<usize>,
    pub rho_conv: f64,
    pub rho_fc: f64,
    pub rho_g: f64,
    /// Synapses revived this epoch.
    pub revived: usize,
    pub wall_seconds: f64,
}

pub const METRICS_HEADER: [&str; 11] = [
    "epoch",
    "train_loss",
    "train_acc",
    "test_acc",
    "compression",
    "alive_units",
    "pruned_units",
    "rho_conv",
    "rho_fc",
    "rho_g",
    "revived",
];

fn join(counts: &[usize]) -> String {
    counts.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn split(field: &str) -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(';').map(str::parse).collect()
}

/// Writes the header plus one row per epoch to `path`.
pub fn emit_metrics(metrics: &[EpochMetrics], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.epoch.to_string(),
            m.train_loss.to_string(),
            m.train_acc.to_string(),
            m.test_acc.to_string(),
            m.compression.to_string(),
            join(&m.alive_units),
            join(&m.pruned_units),
            m.rho_conv.to_string(),
            m.rho_fc.to_string(),
            m.rho_g.to_string(),
            m.revived.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

/// `epoch,wall_seconds` rows.
pub fn emit_timing(metrics: &[EpochMetrics], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "wall_seconds"])?;
    for m in metrics {
        w.write_record([m.epoch.to_string(), format!("{:.3}", m.wall_seconds)])?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a file written by [`emit_metrics`]. `wall_seconds` comes back as 0.
pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let bad = |msg: String| SnnError::Parse { path: path.to_path_buf(), msg };
    if r.headers()?.iter().ne(METRICS_HEADER) {
        return Err(bad("unexpected metrics header".into()));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| f(i).parse::<f64>().map_err(|_| bad(format!("row {}: bad number {:?}", row + 1, f(i))));
        let int = |i: usize| f(i).parse::<usize>().map_err(|_| bad(format!("row {}: bad integer {:?}", row + 1, f(i))));
        let counts = |i: usize| split(f(i)).map_err(|_| bad(format!("row {}: bad counts {:?}", row + 1, f(i))));
        out.push(EpochMetrics {
            epoch: int(0)?,
            train_loss: num(1)?,
            train_acc: num(2)?,
            test_acc: num(3)?,
            compression: num(4)?,
            alive_units: counts(5)?,
            pruned_units: counts(6)?,
            rho_conv: num(7)?,
            rho_fc: num(8)?,
            rho_g: num(9)?,
            revived: int(10)?,
            wall_seconds: 0.0,
        });
    }
    Ok(out)
}
