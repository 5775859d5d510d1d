//! Binary logistic regression.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{ParamVector, RandomSource};
use crate::objectives::{
    bce_terms, check_binary_labels, ensure_dim, sample_indices, sigmoid, Dataset, MiniBatch,
    Objective,
};

/// Logistic regression on a 0/1-labeled dataset.
///
/// Parameters are `[w | b]`: the feature weights followed by one bias term,
/// so `dim = dataset.dim() + 1`. The loss is the mean binary cross-entropy
/// over the batch plus `(decay/2)‖x‖²` (bias included).
#[derive(Clone)]
pub struct Logistic {
    data: Arc<Dataset>,
    decay: f64,
}

impl Logistic {
    pub fn new(data: Arc<Dataset>, decay: f64) -> Result<Self> {
        if !decay.is_finite() || decay < 0.0 {
            return Err(Error::config(format!(
                "weight decay must be finite and ≥ 0, got {decay}"
            )));
        }
        check_binary_labels(&data)?;
        Ok(Logistic { data, decay })
    }

    fn logit(&self, x: &[f64], example: usize) -> f64 {
        let f = self.data.features(example);
        let mut z = x[self.data.dim()]; // bias
        for (w, v) in x[..self.data.dim()].iter().zip(f) {
            z += w * v;
        }
        z
    }

    /// Fraction of the full dataset classified correctly at threshold 0.5.
    pub fn accuracy(&self, x: &ParamVector) -> Result<f64> {
        ensure_dim(self.dim(), x)?;
        let mut hits = 0usize;
        for i in 0..self.data.len() {
            let p = sigmoid(self.logit(x.values(), i));
            let predicted = if p > 0.5 { 1.0 } else { 0.0 };
            if predicted == self.data.label(i) {
                hits += 1;
            }
        }
        Ok(hits as f64 / self.data.len() as f64)
    }
}

impl Objective for Logistic {
    fn dim(&self) -> usize {
        self.data.dim() + 1
    }

    fn loss(&self, x: &ParamVector, batch: &MiniBatch) -> Result<f64> {
        Ok(self.loss_and_gradient(x, batch)?.0)
    }

    fn gradient(&self, x: &ParamVector, batch: &MiniBatch) -> Result<ParamVector> {
        Ok(self.loss_and_gradient(x, batch)?.1)
    }

    fn loss_and_gradient(&self, x: &ParamVector, batch: &MiniBatch) -> Result<(f64, ParamVector)> {
        ensure_dim(self.dim(), x)?;
        if batch.is_empty() {
            return Err(Error::domain("logistic regression needs a non-empty batch"));
        }
        let d = self.data.dim();
        let xs = x.values();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim()];
        for &i in batch.indices() {
            if i >= self.data.len() {
                return Err(Error::domain(format!(
                    "batch index {i} out of range for dataset of {}",
                    self.data.len()
                )));
            }
            let (l, dz) = bce_terms(self.logit(xs, i), self.data.label(i));
            loss += l;
            let f = self.data.features(i);
            for k in 0..d {
                grad[k] += dz * f[k];
            }
            grad[d] += dz;
        }
        let inv = 1.0 / batch.len() as f64;
        loss *= inv;
        for (gk, xk) in grad.iter_mut().zip(xs) {
            *gk = *gk * inv + self.decay * xk;
        }
        loss += 0.5 * self.decay * x.l2_norm().powi(2);
        if !loss.is_finite() {
            return Err(Error::NonFinite { op: "loss" });
        }
        Ok((loss, ParamVector::from_vec(grad)?))
    }

    fn sample_batch(&self, rng: &mut RandomSource, size: usize) -> Result<MiniBatch> {
        sample_indices(self.data.len(), rng, size)
    }

    fn init_params(&self, rng: &mut RandomSource) -> ParamVector {
        let values = (0..self.dim()).map(|_| rng.uniform(-0.5, 0.5)).collect();
        ParamVector::from_vec(values).expect("uniform draws are finite")
    }

    fn describe(&self) -> String {
        format!(
            "logistic(features={}, n={}, decay={})",
            self.data.dim(),
            self.data.len(),
            self.decay
        )
    }
}
