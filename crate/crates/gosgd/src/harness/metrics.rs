//! Metrics rows, the CSV sink, and the loss-smoothing window.

use std::collections::VecDeque;
use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::ParamVector;

/// Batch losses averaged into `loss_smooth50`, counted across all workers.
pub const SMOOTHING_WINDOW: usize = 50;

/// One recorded row of a run. Field names are the CSV header.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    /// Per-worker iteration count at this snapshot.
    pub iter: u64,
    /// Examples each worker has consumed: `iter × batch_size`.
    pub images_per_worker: u64,
    /// Seconds since the run started. Constant zero in simulation mode,
    /// where wall time is meaningless and would break byte reproducibility.
    pub wall_s: f64,
    /// Mean batch loss over workers at this iteration, unsmoothed.
    pub loss_raw: f64,
    /// Mean of the last [`SMOOTHING_WINDOW`] batch losses regardless of worker.
    pub loss_smooth50: f64,
    /// max_i ‖x_i − x̄‖₂ over workers.
    pub consensus_dist: f64,
    /// Total sum-weight over workers and in-flight messages (1 under gossip;
    /// identically 1 for the baselines, which never split their share).
    pub alpha_mass: f64,
    /// Cumulative messages pushed across all workers.
    pub msgs_sent: u64,
    /// Cumulative messages dropped rather than merged (normally zero; the
    /// end-of-run drain folds leftovers in instead of discarding them).
    pub msgs_dropped: u64,
}

/// Crash-safe CSV sink: every row is flushed to disk before the run moves on.
pub struct MetricsWriter {
    out: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let out = csv::Writer::from_path(path).map_err(csv_error)?;
        Ok(MetricsWriter { out })
    }

    pub fn write(&mut self, record: &RunRecord) -> Result<()> {
        self.out.serialize(record).map_err(csv_error)?;
        self.out.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::domain(format!("metrics write failed: {other:?}")),
    }
}

/// Fixed-capacity window over recent batch losses.
#[derive(Clone, Debug)]
pub struct SmoothingRing {
    window: VecDeque<f64>,
    capacity: usize,
}

impl SmoothingRing {
    pub fn new(capacity: usize) -> Self {
        SmoothingRing {
            window: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, loss: f64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(loss);
    }

    /// Mean of the window, or NaN before the first loss arrives.
    pub fn mean(&self) -> f64 {
        if self.window.is_empty() {
            return f64::NAN;
        }
        self.window.iter().sum::<f64>() / self.window.len() as f64
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }
}

/// max_i ‖x_i − x̄‖₂: how far the farthest worker sits from the average.
pub fn consensus_distance(xs: &[ParamVector]) -> Result<f64> {
    let mean = ParamVector::mean(xs.iter())?;
    let mut worst = 0.0f64;
    for x in xs {
        worst = worst.max(x.l2_distance(&mean)?);
    }
    Ok(worst)
}
