//! Comparison algorithms behind the same worker-loop interface: elastic
//! averaging with momentum against a shared center variable, and the naive
//! scheme where workers never communicate at all.

use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::ParamVector;
use crate::objectives::Objective;
use crate::protocol::{GossipConfig, WorkerState};

/// Elastic-averaging parameters.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EasgdConfig {
    /// Elastic strength. The stability range is [0, 2); zero switches the
    /// coupling off entirely, which is what the degenerate plain-SGD
    /// configuration uses.
    pub elastic_alpha: f64,
    /// Momentum μ on the local SGD step.
    pub momentum: f64,
    /// Communication period: exchange with the center every τ-th iteration.
    pub tau: u64,
}

impl EasgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.elastic_alpha.is_finite() || !(0.0..2.0).contains(&self.elastic_alpha) {
            return Err(Error::config(format!(
                "elastic strength must be in [0, 2), got {}",
                self.elastic_alpha
            )));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.tau == 0 {
            return Err(Error::config("communication period τ must be ≥ 1"));
        }
        Ok(())
    }

    /// The communication period equivalent to exchange probability `p`:
    /// `τ = round(1/p)`, at least 1.
    pub fn tau_from_p(p: f64) -> Result<u64> {
        if !p.is_finite() || p <= 0.0 || p > 1.0 {
            return Err(Error::config(format!(
                "cannot derive τ = round(1/p) from p = {p}"
            )));
        }
        Ok(((1.0 / p).round() as u64).max(1))
    }
}

/// The central variable. The single shared-mutable object in the codebase;
/// every exchange is one serialized read-modify-write.
pub struct CenterState {
    x: Mutex<ParamVector>,
}

impl CenterState {
    /// Initialized equal to the workers' common initial x.
    pub fn new(x: ParamVector) -> Self {
        CenterState { x: Mutex::new(x) }
    }

    pub fn snapshot(&self) -> ParamVector {
        self.x.lock().expect("center lock poisoned").clone()
    }

    /// The elastic exchange: `e = α_e·(x − x̃)`, then `x ← x − e` and
    /// `x̃ ← x̃ + e`, atomically on the center. Returns the applied `e`.
    /// At `α_e = 0` the exchange is a no-op and touches nothing.
    pub fn exchange(&self, x: &mut ParamVector, elastic_alpha: f64) -> Result<ParamVector> {
        let mut center = self.x.lock().expect("center lock poisoned");
        if elastic_alpha == 0.0 {
            return Ok(ParamVector::zeros(x.len()));
        }
        let e = x.sub(&center)?.scale(elastic_alpha)?;
        *x = x.sub(&e)?;
        *center = center.add(&e)?;
        Ok(e)
    }
}

/// An elastic-averaging worker: the shared worker state plus its momentum
/// velocity.
#[derive(Clone, Debug)]
pub struct EasgdWorker {
    pub state: WorkerState,
    pub velocity: ParamVector,
}

impl EasgdWorker {
    pub fn new(state: WorkerState) -> Self {
        let velocity = ParamVector::zeros(state.x.len());
        EasgdWorker { state, velocity }
    }
}

/// What one elastic-averaging iteration did.
#[derive(Clone, Copy, Debug)]
pub struct EasgdReport {
    pub raw_loss: f64,
    pub exchanged: bool,
}

/// One elastic-averaging iteration: momentum SGD step
/// (`v ← μ·v − η·g`, `x ← x + v`), then every τ-th iteration the elastic
/// exchange with the center.
pub fn easgd_worker_iteration(
    worker: &mut EasgdWorker,
    center: &CenterState,
    obj: &dyn Objective,
    cfg: &GossipConfig,
    easgd: &EasgdConfig,
) -> Result<EasgdReport> {
    let w = &mut worker.state;
    let batch = obj.sample_batch(&mut w.data_rng, cfg.batch_size)?;
    let eta = cfg.eta.at(w.iteration);
    let step = obj.loss_and_gradient(&w.x, &batch).and_then(|(loss, g)| {
        let velocity = ParamVector::axpy(-eta, &g, &worker.velocity.scale(easgd.momentum)?)?;
        let x = w.x.add(&velocity)?;
        Ok((loss, velocity, x))
    });
    let (raw_loss, velocity, x) = step.map_err(|e| match e {
        Error::NonFinite { .. } => Error::Divergence {
            worker: w.id,
            iteration: w.iteration,
        },
        other => other,
    })?;
    worker.velocity = velocity;
    w.x = x;
    w.iteration += 1;
    let exchanged = w.iteration.is_multiple_of(easgd.tau);
    if exchanged {
        center.exchange(&mut w.x, easgd.elastic_alpha)?;
        // A center exchange is this algorithm's communication event.
        w.bump_sent();
    }
    Ok(EasgdReport { raw_loss, exchanged })
}

/// One naive iteration: a plain SGD step, no communication ever.
pub fn naive_worker_iteration(
    worker: &mut WorkerState,
    obj: &dyn Objective,
    cfg: &GossipConfig,
) -> Result<f64> {
    let raw_loss = crate::protocol::gradient_step(worker, obj, cfg)?;
    worker.iteration += 1;
    Ok(raw_loss)
}
