//! Synthetic binary-classification datasets.
//!
//! Desk-scale stand-ins for image benchmarks: `two-cluster` is linearly
//! separable by construction (logistic regression should ace it) and
//! `two-moons` is two interleaved crescents that no line separates, which is
//! what the MLP runs train on.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{streams, RandomSource};
use crate::objectives::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    TwoCluster,
    TwoMoons,
}

impl DataKind {
    /// Noise scale used when the caller does not pick one.
    pub fn default_noise(self) -> f64 {
        match self {
            DataKind::TwoCluster => 0.5,
            DataKind::TwoMoons => 0.25,
        }
    }
}

impl FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-cluster" => Ok(DataKind::TwoCluster),
            "two-moons" => Ok(DataKind::TwoMoons),
            other => Err(Error::config(format!(
                "unknown dataset kind '{other}' (expected two-cluster or two-moons)"
            ))),
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataKind::TwoCluster => "two-cluster",
            DataKind::TwoMoons => "two-moons",
        })
    }
}

/// Generates `n` labeled 2-D points, classes alternating 0,1,0,1,…
///
/// Two-cluster: class c centered at ±(2, 2) with isotropic Gaussian noise.
/// Two-moons: upper and lower crescents with Gaussian noise added.
/// Deterministic in (kind, n, noise, seed).
pub fn generate(kind: DataKind, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::config("need at least 2 examples (one per class)"));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::config(format!(
            "noise must be finite and ≥ 0, got {noise}"
        )));
    }
    let mut rng = RandomSource::new(seed, streams::DATAGEN);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let point = match kind {
            DataKind::TwoCluster => {
                let sign = if class == 0 { -1.0 } else { 1.0 };
                [
                    2.0 * sign + noise * rng.standard_normal(),
                    2.0 * sign + noise * rng.standard_normal(),
                ]
            }
            DataKind::TwoMoons => {
                let t = rng.uniform(0.0, std::f64::consts::PI);
                let (cx, cy) = if class == 0 {
                    (libm::cos(t), libm::sin(t))
                } else {
                    (1.0 - libm::cos(t), 0.5 - libm::sin(t))
                };
                [
                    cx + noise * rng.standard_normal(),
                    cy + noise * rng.standard_normal(),
                ]
            }
        };
        rows.push(point.to_vec());
        labels.push(class as f64);
    }
    Dataset::new(rows, labels)
}

/// Writes a dataset as `f0,…,f{d-1},label` CSV, the format
/// [`crate::objectives::load_csv_dataset`] reads back.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header: Vec<String> = (0..data.dim()).map(|k| format!("f{k}")).collect();
    header.push("label".into());
    writer.write_record(&header).map_err(csv_io)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.features(i).iter().map(|v| v.to_string()).collect();
        row.push(data.label(i).to_string());
        writer.write_record(&row).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::domain(format!("csv write failed: {other:?}")),
    }
}
