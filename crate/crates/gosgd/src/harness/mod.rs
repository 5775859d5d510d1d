//! Experiment execution: deterministic simulation, real threads, metrics.

mod consensus;
mod diagnostics;
mod figure1;
mod metrics;
mod run;

use std::time::Duration;

pub use consensus::{consensus_decay_experiment, DecayFit, CONSENSUS_FLOOR};
pub use diagnostics::{
    check_gradients, empirical_mixing_weights, finite_difference_gradient,
    max_relative_gradient_error,
};
pub use figure1::{figure1_protocol, Figure1Run, Panel};
pub use metrics::{consensus_distance, MetricsWriter, RunRecord, SmoothingRing, SMOOTHING_WINDOW};
pub use run::{run_experiment, RunOutcome};

/// How long the threaded collector waits for any worker progress before
/// declaring the run wedged. The push-only design cannot deadlock, so a
/// firing watchdog means a defect, not a slow machine.
pub const DEFAULT_WATCHDOG: Duration = Duration::from_secs(600);

/// Worker execution order within one simulated round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterleavePolicy {
    /// Workers step in id order every round.
    RoundRobin,
    /// A fresh scheduler-seeded permutation every round; still fully
    /// deterministic for a given seed, but exercises asynchronous orderings.
    SeededRandom,
}

/// Which engine executes the run.
#[derive(Clone, Copy, Debug)]
pub enum ScheduleMode {
    /// Single-threaded, bit-reproducible, instant message delivery.
    Simulation { policy: InterleavePolicy },
    /// One OS thread per worker plus a collector; measures wall clock.
    Threaded { watchdog: Duration },
}

impl ScheduleMode {
    /// Simulation with seeded-random interleaving (the default engine).
    pub fn simulation() -> Self {
        ScheduleMode::Simulation {
            policy: InterleavePolicy::SeededRandom,
        }
    }

    pub fn round_robin() -> Self {
        ScheduleMode::Simulation {
            policy: InterleavePolicy::RoundRobin,
        }
    }

    pub fn threaded() -> Self {
        ScheduleMode::Threaded {
            watchdog: DEFAULT_WATCHDOG,
        }
    }
}
