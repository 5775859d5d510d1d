//! Algorithm strategy registry.
//!
//! Each training scheme (gossip, elastic averaging, naive) lives behind one
//! trait with two factories: a sequential-simulation cohort that the
//! deterministic scheduler steps one worker-iteration at a time, and a set
//! of self-driving thread workers for concurrent runs. The harness never
//! names a concrete algorithm; it looks one up here by name.

mod easgd;
mod gosgd;
mod naive;

pub use easgd::EasgdAlgorithm;
pub use gosgd::GosgdAlgorithm;
pub use naive::NaiveAlgorithm;

use std::sync::atomic::AtomicBool;
use std::sync::mpsc::Sender;
use std::sync::{Arc, Barrier};

use crate::baselines::EasgdConfig;
use crate::error::{Error, Result};
use crate::numeric::ParamVector;
use crate::objectives::SharedObjective;
use crate::protocol::GossipConfig;

/// Everything a single run needs, independent of execution mode.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub gossip: GossipConfig,
    /// Present iff the run uses the elastic-averaging algorithm.
    pub easgd: Option<EasgdConfig>,
    /// Metrics rows are emitted every this many iterations (plus a final row).
    pub record_every: u64,
}

impl RunConfig {
    pub fn new(gossip: GossipConfig) -> Self {
        RunConfig {
            gossip,
            easgd: None,
            record_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gossip.validate()?;
        if let Some(e) = &self.easgd {
            e.validate()?;
        }
        if self.record_every == 0 {
            return Err(Error::config("recording interval must be ≥ 1"));
        }
        Ok(())
    }
}

/// A cohort of workers driven by the deterministic sequential scheduler.
/// The scheduler owns interleaving; the cohort owns all algorithm state and
/// can produce exact snapshots at any point between steps.
pub trait SimCohort {
    fn workers(&self) -> usize;

    /// Runs one full iteration of worker `i`; returns its batch loss.
    fn step_worker(&mut self, i: usize) -> Result<f64>;

    /// Current parameter vectors, worker order.
    fn snapshot_xs(&self) -> Vec<ParamVector>;

    /// Σα over workers and in-flight messages (1.0 by convention for
    /// algorithms without sum weights).
    fn alpha_mass(&self) -> f64;

    /// Cumulative communication events (pushes or center exchanges).
    fn msgs_sent(&self) -> u64;

    /// Final drain of undelivered messages after the last iteration, so
    /// reported mass is fully settled. Returns how many messages had to be
    /// dropped instead of folded in (normally zero).
    fn settle(&mut self) -> Result<u64>;

    /// The unweighted average of worker parameters.
    fn test_model(&self) -> Result<ParamVector>;
}

/// Per-iteration progress report a thread worker mails to the collector.
#[derive(Clone, Debug)]
pub struct WorkerReport {
    pub worker: usize,
    /// 1-based count of completed iterations.
    pub iteration: u64,
    pub raw_loss: f64,
    /// This worker's conserved mass share (`1/M` up to rounding).
    pub mass_balance: f64,
    /// Cumulative communication events by this worker.
    pub msgs_sent: u64,
    /// Parameter snapshot, attached only on recording iterations.
    pub x: Option<ParamVector>,
}

/// Shared machinery handed to every thread worker.
pub struct ThreadCtx {
    pub reports: Sender<WorkerReport>,
    /// Set by any worker that aborts (divergence); everyone else drains out.
    pub stop: Arc<AtomicBool>,
    /// All workers rendezvous here after their last iteration, so the final
    /// drain runs only once nobody can push anymore.
    pub done: Arc<Barrier>,
}

/// Final state a thread worker hands back through its join handle.
#[derive(Clone, Debug)]
pub struct ThreadOutcome {
    pub worker: usize,
    pub x: ParamVector,
    pub iterations: u64,
    pub mass_balance: f64,
    pub msgs_sent: u64,
    /// Messages left undeliverable after the final drain (normally zero).
    pub dropped: u64,
}

/// A worker that drives itself on its own OS thread. `run` must reach the
/// `done` barrier on every path — including divergence — or peers would
/// wait forever.
pub trait ThreadWorker: Send {
    fn run(self: Box<Self>, ctx: ThreadCtx) -> Result<ThreadOutcome>;
}

/// One training scheme, selected by name at runtime.
pub trait Algorithm: Send + Sync {
    fn name(&self) -> &'static str;

    fn build_sim(&self, cfg: &RunConfig, obj: SharedObjective) -> Result<Box<dyn SimCohort>>;

    fn build_threaded(
        &self,
        cfg: &RunConfig,
        obj: SharedObjective,
    ) -> Result<Vec<Box<dyn ThreadWorker>>>;
}

static GOSGD: GosgdAlgorithm = GosgdAlgorithm;
static EASGD: EasgdAlgorithm = EasgdAlgorithm;
static NAIVE: NaiveAlgorithm = NaiveAlgorithm;
static REGISTRY: [&dyn Algorithm; 3] = [&GOSGD, &EASGD, &NAIVE];

/// All registered algorithms.
pub fn registry() -> &'static [&'static dyn Algorithm] {
    &REGISTRY
}

/// Finds an algorithm by its registered name.
pub fn lookup(name: &str) -> Result<&'static dyn Algorithm> {
    registry()
        .iter()
        .find(|a| a.name() == name)
        .copied()
        .ok_or_else(|| {
            let known: Vec<&str> = registry().iter().map(|a| a.name()).collect();
            Error::config(format!(
                "unknown algorithm '{name}' (known: {})",
                known.join(", ")
            ))
        })
}

/// Shared config guards for the two gossip-free algorithms.
pub(crate) fn reject_easgd_params(cfg: &RunConfig, algo: &str) -> Result<()> {
    if cfg.easgd.is_some() {
        return Err(Error::config(format!(
            "elastic-averaging parameters do not apply to '{algo}'"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_all_three() {
        let names: Vec<&str> = registry().iter().map(|a| a.name()).collect();
        assert_eq!(names, vec!["gosgd", "easgd", "naive"]);
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(lookup("gosgd").unwrap().name(), "gosgd");
        assert_eq!(lookup("easgd").unwrap().name(), "easgd");
        let err = match lookup("adam") {
            Ok(_) => panic!("unknown algorithm should not resolve"),
            Err(e) => e,
        };
        assert!(err.to_string().contains("known"));
    }
}
