//! Pluggable differentiable objectives with mini-batch gradient oracles.
//!
//! Three tiers stand in for large-scale image training: a quadratic bowl
//! with an analytic optimum, convex logistic regression on a dataset, and a
//! small non-convex MLP. All of them expose the same interface: a mean
//! per-batch loss, its gradient, and seeded batch sampling with replacement.

mod logistic;
mod mlp;
mod quadratic;

pub use logistic::Logistic;
pub use mlp::Mlp;
pub use quadratic::Quadratic;

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{ParamVector, RandomSource};

/// Training examples: fixed-dimension numeric feature rows, one scalar label
/// each. Read-only after construction, so it is shared freely across workers.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Vec<f64>, // row-major, len = n * dim
    labels: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Ingestion {
                row: 0,
                message: "dataset has no examples".into(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::Ingestion {
                row: 0,
                message: format!("{} feature rows but {} labels", rows.len(), labels.len()),
            });
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::Ingestion {
                row: 1,
                message: "examples have no feature columns".into(),
            });
        }
        let mut features = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Ingestion {
                    row: i + 1,
                    message: format!("expected {} features, got {}", dim, row.len()),
                });
            }
            if row.iter().any(|v| !v.is_finite()) || !labels[i].is_finite() {
                return Err(Error::Ingestion {
                    row: i + 1,
                    message: "non-finite value".into(),
                });
            }
            features.extend_from_slice(row);
        }
        Ok(Dataset {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }
}

/// Loads a numeric CSV with a header row into a [`Dataset`].
///
/// `label_column` names the label column; if no header matches it and it
/// parses as a number, it is used as a zero-based column index instead. All
/// other columns become features, in header order. Every failure reports the
/// offending data row (row 0 means the header or the file itself).
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Ingestion {
            row: 0,
            message: format!("{}: {e}", path.display()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Ingestion {
            row: 0,
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .or_else(|| {
            label_column
                .parse::<usize>()
                .ok()
                .filter(|&i| i < headers.len())
        })
        .ok_or_else(|| Error::Ingestion {
            row: 0,
            message: format!("label column '{label_column}' not found"),
        })?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::Ingestion {
            row: row_no,
            message: format!("malformed record: {e}"),
        })?;
        let mut features = Vec::with_capacity(headers.len().saturating_sub(1));
        let mut label = None;
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Ingestion {
                row: row_no,
                message: format!(
                    "non-numeric value '{}' in column '{}'",
                    field,
                    headers.get(col).unwrap_or("?")
                ),
            })?;
            if col == label_idx {
                label = Some(value);
            } else {
                features.push(value);
            }
        }
        let label = label.ok_or_else(|| Error::Ingestion {
            row: row_no,
            message: "row is missing the label column".into(),
        })?;
        rows.push(features);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Ingestion {
            row: 0,
            message: "no data rows after the header".into(),
        });
    }
    Dataset::new(rows, labels)
}

/// Indices into a dataset, sampled with replacement. The deterministic
/// quadratic objective uses an empty placeholder batch.
#[derive(Clone, Debug, Default)]
pub struct MiniBatch {
    indices: Vec<usize>,
}

impl MiniBatch {
    pub fn new(indices: Vec<usize>) -> Self {
        MiniBatch { indices }
    }

    pub fn empty() -> Self {
        MiniBatch::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A differentiable objective with a mini-batch gradient oracle.
///
/// `loss` is the mean per-example loss over the batch plus `(decay/2)·‖x‖²`;
/// `gradient` is its exact derivative (mean per-example gradient plus
/// `decay·x`). Implementations are read-only after construction and shared
/// across workers; all sampling state lives in the caller's `RandomSource`.
pub trait Objective: Send + Sync {
    /// Parameter dimension d.
    fn dim(&self) -> usize;

    fn loss(&self, x: &ParamVector, batch: &MiniBatch) -> Result<f64>;

    fn gradient(&self, x: &ParamVector, batch: &MiniBatch) -> Result<ParamVector>;

    /// Loss and gradient of the same batch in one pass (the worker hot path).
    fn loss_and_gradient(&self, x: &ParamVector, batch: &MiniBatch) -> Result<(f64, ParamVector)> {
        Ok((self.loss(x, batch)?, self.gradient(x, batch)?))
    }

    /// Draws `size` indices uniformly with replacement.
    fn sample_batch(&self, rng: &mut RandomSource, size: usize) -> Result<MiniBatch>;

    /// Draws the shared initial parameter vector.
    fn init_params(&self, rng: &mut RandomSource) -> ParamVector;

    /// Analytic optimum, where one exists.
    fn optimum(&self) -> Option<ParamVector> {
        None
    }

    /// Short human-readable descriptor for manifests and logs.
    fn describe(&self) -> String;
}

pub type SharedObjective = Arc<dyn Objective>;

pub(crate) fn ensure_dim(expected: usize, x: &ParamVector) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dimension {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn sample_indices(n: usize, rng: &mut RandomSource, size: usize) -> Result<MiniBatch> {
    if size == 0 {
        return Err(Error::domain("batch size must be at least 1"));
    }
    Ok(MiniBatch::new((0..size).map(|_| rng.index(n)).collect()))
}

/// Numerically stable binary cross-entropy pieces shared by the two
/// classifiers: per-example loss and dloss/dlogit for logit `z`, label `y`.
pub(crate) fn bce_terms(z: f64, y: f64) -> (f64, f64) {
    let loss = z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs()));
    (loss, sigmoid(z) - y)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

pub(crate) fn check_binary_labels(data: &Dataset) -> Result<()> {
    for i in 0..data.len() {
        let y = data.label(i);
        if y != 0.0 && y != 1.0 {
            return Err(Error::domain(format!(
                "binary classifier needs 0/1 labels, found {y} at example {i}"
            )));
        }
    }
    Ok(())
}
