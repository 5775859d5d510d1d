//! Quadratic bowl with a known optimum.

use crate::error::{Error, Result};
use crate::numeric::{streams, ParamVector, RandomSource};
use crate::objectives::{ensure_dim, MiniBatch, Objective};

/// `loss(x) = ½‖x − x*‖² + (decay/2)‖x‖²` for a fixed target `x*`.
///
/// Batch-independent: `sample_batch` returns an empty placeholder and the
/// loss ignores it. The analytic optimum `x*/(1+decay)` makes convergence
/// claims checkable exactly.
#[derive(Clone, Debug)]
pub struct Quadratic {
    target: ParamVector,
    decay: f64,
}

impl Quadratic {
    pub fn new(target: ParamVector, decay: f64) -> Result<Self> {
        if !decay.is_finite() || decay < 0.0 {
            return Err(Error::config(format!(
                "weight decay must be finite and ≥ 0, got {decay}"
            )));
        }
        if target.is_empty() {
            return Err(Error::config("quadratic target must be non-empty"));
        }
        Ok(Quadratic { target, decay })
    }

    /// Target drawn uniformly from `[-1, 1]^dim` on the run's target stream.
    pub fn random(dim: usize, seed: u64, decay: f64) -> Result<Self> {
        let mut rng = RandomSource::new(seed, streams::TARGET);
        let values = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Quadratic::new(ParamVector::from_vec(values)?, decay)
    }

    pub fn target(&self) -> &ParamVector {
        &self.target
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn loss(&self, x: &ParamVector, _batch: &MiniBatch) -> Result<f64> {
        ensure_dim(self.dim(), x)?;
        let dist = x.l2_distance(&self.target)?;
        let loss = 0.5 * dist * dist + 0.5 * self.decay * x.l2_norm().powi(2);
        if !loss.is_finite() {
            return Err(Error::NonFinite { op: "loss" });
        }
        Ok(loss)
    }

    fn gradient(&self, x: &ParamVector, _batch: &MiniBatch) -> Result<ParamVector> {
        ensure_dim(self.dim(), x)?;
        let diff = x.sub(&self.target)?;
        // decay == 0 keeps the gradient exactly x − x*.
        ParamVector::axpy(self.decay, x, &diff)
    }

    fn sample_batch(&self, _rng: &mut RandomSource, size: usize) -> Result<MiniBatch> {
        if size == 0 {
            return Err(Error::domain("batch size must be at least 1"));
        }
        Ok(MiniBatch::empty())
    }

    fn init_params(&self, rng: &mut RandomSource) -> ParamVector {
        let values = (0..self.dim()).map(|_| rng.uniform(-0.5, 0.5)).collect();
        ParamVector::from_vec(values).expect("uniform draws are finite")
    }

    fn optimum(&self) -> Option<ParamVector> {
        Some(
            self.target
                .scale(1.0 / (1.0 + self.decay))
                .expect("finite target"),
        )
    }

    fn describe(&self) -> String {
        format!("quadratic(d={}, decay={})", self.dim(), self.decay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(target: &[f64]) -> Quadratic {
        Quadratic::new(ParamVector::from_vec(target.to_vec()).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn loss_is_zero_at_target() {
        let q = quad(&[1.0, -2.0, 3.0]);
        let x = q.target().clone();
        assert_eq!(q.loss(&x, &MiniBatch::empty()).unwrap(), 0.0);
    }

    #[test]
    fn gradient_is_zero_at_target() {
        let q = quad(&[1.0, -2.0]);
        let g = q.gradient(q.target(), &MiniBatch::empty()).unwrap();
        assert_eq!(g.values(), &[0.0, 0.0]);
    }

    #[test]
    fn gradient_is_displacement() {
        let q = quad(&[0.0]);
        let x = ParamVector::from_vec(vec![2.0]).unwrap();
        let g = q.gradient(&x, &MiniBatch::empty()).unwrap();
        assert_eq!(g.values(), &[2.0]);
    }

    #[test]
    fn gradient_is_exact_without_decay() {
        let q = quad(&[0.25, -0.75, 1.5]);
        let x = ParamVector::from_vec(vec![1.1, 2.2, -3.3]).unwrap();
        let g = q.gradient(&x, &MiniBatch::empty()).unwrap();
        let diff = x.sub(q.target()).unwrap();
        assert!(g.bits_eq(&diff));
    }

    #[test]
    fn decay_shifts_optimum() {
        let q = Quadratic::new(ParamVector::from_vec(vec![2.0]).unwrap(), 1.0).unwrap();
        let opt = q.optimum().unwrap();
        assert_eq!(opt.values(), &[1.0]);
        let g = q.gradient(&opt, &MiniBatch::empty()).unwrap();
        assert!(g.values()[0].abs() < 1e-15);
    }

    #[test]
    fn batch_identity_is_irrelevant() {
        let q = quad(&[1.0, 1.0]);
        let x = ParamVector::from_vec(vec![0.5, 0.0]).unwrap();
        let a = q.loss(&x, &MiniBatch::empty()).unwrap();
        let b = q.loss(&x, &MiniBatch::new(vec![3, 7, 9])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let q = quad(&[1.0, 2.0]);
        let x = ParamVector::from_vec(vec![1.0]).unwrap();
        assert!(q.loss(&x, &MiniBatch::empty()).is_err());
        assert!(q.gradient(&x, &MiniBatch::empty()).is_err());
    }

    #[test]
    fn random_target_is_seed_stable() {
        let a = Quadratic::random(8, 9, 0.0).unwrap();
        let b = Quadratic::random(8, 9, 0.0).unwrap();
        assert!(a.target().bits_eq(b.target()));
    }
}
