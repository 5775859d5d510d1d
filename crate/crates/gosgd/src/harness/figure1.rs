//! The two-panel comparison protocol: loss against images processed under
//! maximal exchange, and loss against wall clock under sparse exchange.

use std::path::{Path, PathBuf};

use crate::algo::{lookup, RunConfig};
use crate::baselines::EasgdConfig;
use crate::error::Result;
use crate::harness::metrics::MetricsWriter;
use crate::harness::run::{run_experiment, RunOutcome};
use crate::harness::ScheduleMode;
use crate::objectives::SharedObjective;
use crate::protocol::GossipConfig;

/// Which x-axis a run feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    /// Exchange maximized (p = 1, τ = 1), deterministic simulation; compare
    /// loss against images processed per worker.
    Images,
    /// Sparse exchange (p = 0.02, τ = 1/p), real threads; compare loss
    /// against wall-clock seconds.
    Time,
}

impl Panel {
    fn tag(self) -> &'static str {
        match self {
            Panel::Images => "images",
            Panel::Time => "time",
        }
    }

    fn push_probability(self, sparse_p: f64) -> f64 {
        match self {
            Panel::Images => 1.0,
            Panel::Time => sparse_p,
        }
    }

    fn mode(self) -> ScheduleMode {
        match self {
            Panel::Images => ScheduleMode::simulation(),
            Panel::Time => ScheduleMode::threaded(),
        }
    }
}

/// One completed run of the protocol.
#[derive(Debug)]
pub struct Figure1Run {
    pub algo: &'static str,
    pub panel: Panel,
    pub path: PathBuf,
    pub outcome: RunOutcome,
}

/// Runs all three algorithms on identical seeds and objective, once per
/// panel, writing `<panel>_<algo>.csv` into `outdir`. The exchange period
/// τ for the elastic baseline mirrors the gossip rate: τ = 1 when p = 1,
/// τ = round(1/p) on the sparse panel.
pub fn figure1_protocol(
    obj: SharedObjective,
    base: &GossipConfig,
    easgd: EasgdConfig,
    sparse_p: f64,
    record_every: u64,
    outdir: &Path,
) -> Result<Vec<Figure1Run>> {
    let mut out = Vec::with_capacity(6);
    for panel in [Panel::Images, Panel::Time] {
        let p = panel.push_probability(sparse_p);
        for algo in ["gosgd", "easgd", "naive"] {
            let mut cfg = RunConfig::new(GossipConfig {
                p,
                ..base.clone()
            });
            cfg.record_every = record_every;
            if algo == "easgd" {
                cfg.easgd = Some(EasgdConfig {
                    tau: EasgdConfig::tau_from_p(p)?,
                    ..easgd
                });
            }
            let path = outdir.join(format!("{}_{}.csv", panel.tag(), algo));
            let mut writer = MetricsWriter::create(&path)?;
            let outcome = run_experiment(
                lookup(algo)?,
                &cfg,
                obj.clone(),
                panel.mode(),
                Some(&mut writer),
            )?;
            out.push(Figure1Run {
                algo: lookup(algo)?.name(),
                panel,
                path,
                outcome,
            });
        }
    }
    Ok(out)
}
