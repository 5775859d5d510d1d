//! The gossip state machine: worker state, push-only mixing messages, and
//! sum-weight updates.
//!
//! Each worker carries parameters `x` and a share `α` of the global unit
//! mass. A push halves the sender's share and mails the other half out with
//! a copy of `x` (the sender's own parameters are deliberately left
//! unscaled); processing folds a received pair in by α-weighted convex
//! combination and absorbs its share. Both Σα and Σα·x over workers *plus
//! in-flight messages* are conserved by mixing, which is the form of the
//! conservation law that holds at every instant of an asynchronous run.

mod transport;

pub use transport::{channel_mesh, ChannelTransport, GossipTransport, InstantNetwork, InstantView};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{streams, Kahan, ParamVector, RandomSource};
use crate::objectives::Objective;

/// Immutable (parameters, α-share) pair in flight between workers.
#[derive(Clone, Debug)]
pub struct GossipMessage {
    x: ParamVector,
    alpha: f64,
}

impl GossipMessage {
    pub fn new(x: ParamVector, alpha: f64) -> Self {
        assert!(alpha > 0.0, "message α must be positive, got {alpha}");
        GossipMessage { x, alpha }
    }

    pub fn x(&self) -> &ParamVector {
        &self.x
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn into_parts(self) -> (ParamVector, f64) {
        (self.x, self.alpha)
    }
}

/// Learning-rate schedule. Constant is the default; the inverse-time form
/// is the decay hook for step-size experiments.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant(f64),
    InverseTime { eta0: f64, decay: f64 },
}

impl EtaSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            EtaSchedule::Constant(eta) => eta,
            EtaSchedule::InverseTime { eta0, decay } => eta0 / (1.0 + decay * t as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EtaSchedule::Constant(eta) => eta.is_finite() && eta > 0.0,
            EtaSchedule::InverseTime { eta0, decay } => {
                eta0.is_finite() && eta0 > 0.0 && decay.is_finite() && decay >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid learning rate {self:?}")))
        }
    }
}

/// Run parameters shared by every algorithm.
#[derive(Clone, Debug, Serialize)]
pub struct GossipConfig {
    /// Worker count M.
    pub workers: usize,
    /// Per-iteration probability of pushing to one uniformly chosen peer.
    pub p: f64,
    pub eta: EtaSchedule,
    pub batch_size: usize,
    pub max_iterations: u64,
    pub seed: u64,
}

impl GossipConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::config("need at least one worker"));
        }
        if !self.p.is_finite() || !(0.0..=1.0).contains(&self.p) {
            return Err(Error::config(format!(
                "exchange probability must be in [0, 1], got {}",
                self.p
            )));
        }
        self.eta.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("need at least one iteration"));
        }
        Ok(())
    }
}

/// One agent: parameters, sum-weight share, seeded randomness, counters.
///
/// Randomness is split into two per-worker streams — data sampling and
/// gossip coin flips — so algorithms that never gossip consume exactly the
/// same data draws as ones that do, making trajectory comparisons bitwise.
#[derive(Clone, Debug)]
pub struct WorkerState {
    pub id: usize,
    pub x: ParamVector,
    /// Sum-weight share; positive always (halving never reaches zero).
    pub alpha: f64,
    /// Completed iterations.
    pub iteration: u64,
    pub data_rng: RandomSource,
    pub gossip_rng: RandomSource,
    /// Compensated (pushed − consumed) α, so `alpha + flight_net` is this
    /// worker's share of total mass without snapshotting anyone's queues.
    flight_net: Kahan,
    msgs_sent: u64,
    msgs_consumed: u64,
    send_failures: u64,
}

impl WorkerState {
    pub fn new(id: usize, x: ParamVector, alpha: f64, seed: u64) -> Self {
        assert!(alpha > 0.0, "initial α must be positive");
        WorkerState {
            id,
            x,
            alpha,
            iteration: 0,
            data_rng: RandomSource::new(seed, streams::data(id)),
            gossip_rng: RandomSource::new(seed, streams::gossip(id)),
            flight_net: Kahan::new(),
            msgs_sent: 0,
            msgs_consumed: 0,
            send_failures: 0,
        }
    }

    /// This worker's conserved mass share: `α + pushed − consumed`. Always
    /// `1/M` up to rounding, even while its messages are in flight.
    pub fn mass_balance(&self) -> f64 {
        self.alpha + self.flight_net.value()
    }

    pub fn msgs_sent(&self) -> u64 {
        self.msgs_sent
    }

    pub fn msgs_consumed(&self) -> u64 {
        self.msgs_consumed
    }

    pub fn send_failures(&self) -> u64 {
        self.send_failures
    }

    /// Counts a non-gossip communication event (e.g. a center exchange) in
    /// the same sent-messages column the gossip push uses.
    pub(crate) fn bump_sent(&mut self) {
        self.msgs_sent += 1;
    }
}

/// All M workers starting from one shared random `x` with `α = 1/M` each.
pub fn init_workers(cfg: &GossipConfig, obj: &dyn Objective) -> Result<Vec<WorkerState>> {
    cfg.validate()?;
    let mut init_rng = RandomSource::new(cfg.seed, streams::INIT);
    let x0 = obj.init_params(&mut init_rng);
    let alpha0 = 1.0 / cfg.workers as f64;
    Ok((0..cfg.workers)
        .map(|id| WorkerState::new(id, x0.clone(), alpha0, cfg.seed))
        .collect())
}

/// Halves the sender's share and mails (copy of x, new share) to `peer`.
/// The sender's own parameters are left untouched.
pub fn mixing_push(sender: &mut WorkerState, peer: usize, transport: &mut dyn GossipTransport) {
    sender.alpha *= 0.5; // exact: power-of-two scaling
    let msg = GossipMessage::new(sender.x.clone(), sender.alpha);
    if transport.push_to(peer, msg) {
        sender.flight_net.add(sender.alpha);
        sender.msgs_sent += 1;
    } else {
        // Delivery impossible; undo the halving so no mass is lost.
        sender.alpha *= 2.0;
        sender.send_failures += 1;
    }
}

/// Drains the worker's inbox in arrival order, folding each message in:
/// `x ← (α_j·x_j + α_i·x_i)/(α_i + α_j)`, then `α ← α_i + α_j`.
/// Returns how many messages were consumed.
pub fn mixing_process(
    worker: &mut WorkerState,
    transport: &mut dyn GossipTransport,
) -> Result<usize> {
    let mut consumed = 0;
    while let Some(msg) = transport.try_pop() {
        let (xj, aj) = msg.into_parts();
        let w = aj / (worker.alpha + aj);
        worker.x = ParamVector::convex_combine(w, &xj, &worker.x)?;
        worker.alpha += aj;
        worker.flight_net.add(-aj);
        worker.msgs_consumed += 1;
        consumed += 1;
    }
    Ok(consumed)
}

/// What one full worker iteration did.
#[derive(Clone, Copy, Debug)]
pub struct IterationReport {
    pub raw_loss: f64,
    pub processed: usize,
    pub pushed: bool,
}

/// One full worker iteration, in order: process inbox, one SGD step on a
/// fresh mini-batch, then with probability `p` push to one uniform peer.
/// At most one push per iteration. Non-finite parameters or loss abort with
/// a divergence report naming the worker and iteration.
pub fn worker_iteration(
    worker: &mut WorkerState,
    obj: &dyn Objective,
    cfg: &GossipConfig,
    transport: &mut dyn GossipTransport,
) -> Result<IterationReport> {
    let processed = mixing_process(worker, transport)?;
    let raw_loss = gradient_step(worker, obj, cfg)?;
    let pushed = maybe_push(worker, cfg, transport);
    worker.iteration += 1;
    Ok(IterationReport {
        raw_loss,
        processed,
        pushed,
    })
}

/// The shared SGD update `x ← x − η·g`. Every algorithm funnels its
/// gradient step through here so degenerate configurations compare bitwise.
pub fn sgd_step(x: &ParamVector, g: &ParamVector, eta: f64) -> Result<ParamVector> {
    ParamVector::axpy(-eta, g, x)
}

/// Samples a batch and applies one SGD step; returns the batch loss.
pub(crate) fn gradient_step(
    worker: &mut WorkerState,
    obj: &dyn Objective,
    cfg: &GossipConfig,
) -> Result<f64> {
    let batch = obj.sample_batch(&mut worker.data_rng, cfg.batch_size)?;
    let eta = cfg.eta.at(worker.iteration);
    let step = obj
        .loss_and_gradient(&worker.x, &batch)
        .and_then(|(loss, g)| Ok((loss, sgd_step(&worker.x, &g, eta)?)));
    match step {
        Ok((loss, x)) => {
            worker.x = x;
            Ok(loss)
        }
        Err(Error::NonFinite { .. }) => Err(Error::Divergence {
            worker: worker.id,
            iteration: worker.iteration,
        }),
        Err(e) => Err(e),
    }
}

/// The gossip tail of an iteration: Bernoulli(p), then a uniform peer. The
/// coin is flipped even when it cannot matter (p = 0, or M = 1 where there
/// is no peer) so the gossip stream advances identically in every variant.
fn maybe_push(
    worker: &mut WorkerState,
    cfg: &GossipConfig,
    transport: &mut dyn GossipTransport,
) -> bool {
    let send = worker.gossip_rng.bernoulli(cfg.p);
    if send && cfg.workers >= 2 {
        let peer = worker.gossip_rng.uniform_peer(worker.id, cfg.workers);
        mixing_push(worker, peer, transport);
        true
    } else {
        false
    }
}

/// A mixing-only iteration (no gradient): process inbox, maybe push. Used
/// by consensus-decay measurements where gradients are disabled.
pub fn mixing_iteration(
    worker: &mut WorkerState,
    cfg: &GossipConfig,
    transport: &mut dyn GossipTransport,
) -> Result<IterationReport> {
    let processed = mixing_process(worker, transport)?;
    let pushed = maybe_push(worker, cfg, transport);
    worker.iteration += 1;
    Ok(IterationReport {
        raw_loss: f64::NAN,
        processed,
        pushed,
    })
}

/// The test model: the plain unweighted average of worker parameters
/// (deliberately not α-weighted).
pub fn test_model(workers: &[WorkerState]) -> Result<ParamVector> {
    ParamVector::mean(workers.iter().map(|w| &w.x))
}

/// Σα and Σα·x over a consistent snapshot of workers and undelivered
/// messages, compensated-summed.
pub fn total_mass<'a>(
    workers: &[WorkerState],
    in_flight: impl Iterator<Item = &'a GossipMessage>,
) -> Result<(f64, ParamVector)> {
    let first = workers
        .first()
        .ok_or_else(|| Error::domain("total_mass of an empty worker set"))?;
    let dim = first.x.len();
    let mut alpha_sum = Kahan::new();
    let mut weighted = vec![Kahan::new(); dim];
    let mut fold = |alpha: f64, x: &ParamVector| -> Result<()> {
        if x.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: x.len(),
            });
        }
        alpha_sum.add(alpha);
        for (acc, v) in weighted.iter_mut().zip(x.values()) {
            acc.add(alpha * v);
        }
        Ok(())
    };
    for w in workers {
        fold(w.alpha, &w.x)?;
    }
    for m in in_flight {
        fold(m.alpha, &m.x)?;
    }
    let weighted = ParamVector::from_vec(weighted.iter().map(|k| k.value()).collect())?;
    Ok((alpha_sum.value(), weighted))
}
