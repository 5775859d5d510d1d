//! One-hidden-layer tanh network with a sigmoid output.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{ParamVector, RandomSource};
use crate::objectives::{
    bce_terms, check_binary_labels, ensure_dim, sample_indices, Dataset, MiniBatch, Objective,
};

/// Non-convex binary classifier: `sigmoid(W2 · tanh(W1·f + b1) + b2)` with
/// binary cross-entropy loss.
///
/// The whole network is flattened row-major into one parameter vector in the
/// order `[W1 | b1 | W2 | b2]`, where `W1` is `hidden × in_dim`, `b1` and
/// `W2` are `hidden`, and `b2` is a scalar — so mixing always operates on
/// the complete model. `dim = hidden·(in_dim + 2) + 1`.
#[derive(Clone)]
pub struct Mlp {
    data: Arc<Dataset>,
    hidden: usize,
    decay: f64,
}

impl Mlp {
    pub fn new(data: Arc<Dataset>, hidden: usize, decay: f64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::config("mlp needs at least one hidden unit"));
        }
        if !decay.is_finite() || decay < 0.0 {
            return Err(Error::config(format!(
                "weight decay must be finite and ≥ 0, got {decay}"
            )));
        }
        check_binary_labels(&data)?;
        Ok(Mlp {
            data,
            hidden,
            decay,
        })
    }

    fn in_dim(&self) -> usize {
        self.data.dim()
    }

    // Layout offsets into the flat parameter vector.
    fn w1(&self, j: usize, k: usize) -> usize {
        j * self.in_dim() + k
    }
    fn b1(&self, j: usize) -> usize {
        self.hidden * self.in_dim() + j
    }
    fn w2(&self, j: usize) -> usize {
        self.hidden * (self.in_dim() + 1) + j
    }
    fn b2(&self) -> usize {
        self.hidden * (self.in_dim() + 2)
    }

    /// Fraction of the full dataset classified correctly at threshold 0.5.
    pub fn accuracy(&self, x: &ParamVector) -> Result<f64> {
        ensure_dim(self.dim(), x)?;
        let mut h = vec![0.0; self.hidden];
        let mut hits = 0usize;
        for i in 0..self.data.len() {
            let z = self.forward(x.values(), i, &mut h);
            let predicted = if z > 0.0 { 1.0 } else { 0.0 };
            if predicted == self.data.label(i) {
                hits += 1;
            }
        }
        Ok(hits as f64 / self.data.len() as f64)
    }

    /// Computes the output logit for one example, filling `h` with the
    /// hidden activations (needed again by the backward pass).
    fn forward(&self, xs: &[f64], example: usize, h: &mut [f64]) -> f64 {
        let f = self.data.features(example);
        let d = self.in_dim();
        for j in 0..self.hidden {
            let mut a = xs[self.b1(j)];
            for (k, fk) in f.iter().enumerate().take(d) {
                a += xs[self.w1(j, 0) + k] * fk;
            }
            h[j] = libm::tanh(a);
        }
        let mut z = xs[self.b2()];
        for j in 0..self.hidden {
            z += xs[self.w2(j)] * h[j];
        }
        z
    }
}

impl Objective for Mlp {
    fn dim(&self) -> usize {
        self.hidden * (self.in_dim() + 2) + 1
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
            return Err(Error::domain("mlp needs a non-empty batch"));
        }
        let xs = x.values();
        let d = self.in_dim();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim()];
        let mut h = vec![0.0; self.hidden];
        for &i in batch.indices() {
            if i >= self.data.len() {
                return Err(Error::domain(format!(
                    "batch index {i} out of range for dataset of {}",
                    self.data.len()
                )));
            }
            let z = self.forward(xs, i, &mut h);
            let (l, dz) = bce_terms(z, self.data.label(i));
            loss += l;
            let f = self.data.features(i);
            grad[self.b2()] += dz;
            for j in 0..self.hidden {
                grad[self.w2(j)] += dz * h[j];
                // d tanh(a) / da = 1 − tanh²(a)
                let da = dz * xs[self.w2(j)] * (1.0 - h[j] * h[j]);
                grad[self.b1(j)] += da;
                let row = self.w1(j, 0);
                for k in 0..d {
                    grad[row + k] += da * f[k];
                }
            }
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

    /// Uniform in `±1/√fan_in` per layer, drawn in layout order.
    fn init_params(&self, rng: &mut RandomSource) -> ParamVector {
        let bound1 = 1.0 / (self.in_dim() as f64).sqrt();
        let bound2 = 1.0 / (self.hidden as f64).sqrt();
        let mut values = Vec::with_capacity(self.dim());
        for _ in 0..self.hidden * (self.in_dim() + 1) {
            values.push(rng.uniform(-bound1, bound1)); // W1 and b1
        }
        for _ in 0..self.hidden + 1 {
            values.push(rng.uniform(-bound2, bound2)); // W2 and b2
        }
        ParamVector::from_vec(values).expect("uniform draws are finite")
    }

    fn describe(&self) -> String {
        format!(
            "mlp(features={}, hidden={}, n={}, decay={})",
            self.in_dim(),
            self.hidden,
            self.data.len(),
            self.decay
        )
    }
}
