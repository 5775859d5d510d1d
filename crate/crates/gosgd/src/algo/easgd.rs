//! Elastic averaging behind the strategy interface.

use std::sync::atomic::Ordering;
use std::sync::Arc;

use crate::algo::{
    Algorithm, RunConfig, SimCohort, ThreadCtx, ThreadOutcome, ThreadWorker, WorkerReport,
};
use crate::baselines::{easgd_worker_iteration, CenterState, EasgdConfig, EasgdWorker};
use crate::error::{Error, Result};
use crate::numeric::ParamVector;
use crate::objectives::SharedObjective;
use crate::protocol::init_workers;

pub struct EasgdAlgorithm;

impl EasgdAlgorithm {
    fn easgd_cfg(cfg: &RunConfig) -> Result<EasgdConfig> {
        cfg.easgd.ok_or_else(|| {
            Error::config("the easgd algorithm needs elastic-averaging parameters")
        })
    }

    fn build_workers(cfg: &RunConfig, obj: &SharedObjective) -> Result<(Vec<EasgdWorker>, Arc<CenterState>)> {
        cfg.validate()?;
        let workers = init_workers(&cfg.gossip, obj.as_ref())?;
        let center = Arc::new(CenterState::new(workers[0].x.clone()));
        Ok((workers.into_iter().map(EasgdWorker::new).collect(), center))
    }
}

impl Algorithm for EasgdAlgorithm {
    fn name(&self) -> &'static str {
        "easgd"
    }

    fn build_sim(&self, cfg: &RunConfig, obj: SharedObjective) -> Result<Box<dyn SimCohort>> {
        let easgd = Self::easgd_cfg(cfg)?;
        let (workers, center) = Self::build_workers(cfg, &obj)?;
        Ok(Box::new(EasgdSim {
            workers,
            center,
            obj,
            cfg: cfg.clone(),
            easgd,
        }))
    }

    fn build_threaded(
        &self,
        cfg: &RunConfig,
        obj: SharedObjective,
    ) -> Result<Vec<Box<dyn ThreadWorker>>> {
        let easgd = Self::easgd_cfg(cfg)?;
        let (workers, center) = Self::build_workers(cfg, &obj)?;
        Ok(workers
            .into_iter()
            .map(|worker| {
                Box::new(EasgdThread {
                    worker,
                    center: Arc::clone(&center),
                    obj: obj.clone(),
                    cfg: cfg.clone(),
                    easgd,
                }) as Box<dyn ThreadWorker>
            })
            .collect())
    }
}

struct EasgdSim {
    workers: Vec<EasgdWorker>,
    center: Arc<CenterState>,
    obj: SharedObjective,
    cfg: RunConfig,
    easgd: EasgdConfig,
}

impl SimCohort for EasgdSim {
    fn workers(&self) -> usize {
        self.workers.len()
    }

    fn step_worker(&mut self, i: usize) -> Result<f64> {
        let report = easgd_worker_iteration(
            &mut self.workers[i],
            &self.center,
            self.obj.as_ref(),
            &self.cfg.gossip,
            &self.easgd,
        )?;
        Ok(report.raw_loss)
    }

    fn snapshot_xs(&self) -> Vec<ParamVector> {
        self.workers.iter().map(|w| w.state.x.clone()).collect()
    }

    fn alpha_mass(&self) -> f64 {
        // No sum weights in this scheme; each worker's conceptual share
        // stays 1/M, so the conserved total is 1 by definition.
        self.workers.iter().map(|w| w.state.mass_balance()).sum()
    }

    fn msgs_sent(&self) -> u64 {
        self.workers.iter().map(|w| w.state.msgs_sent()).sum()
    }

    fn settle(&mut self) -> Result<u64> {
        Ok(0) // nothing is ever in flight
    }

    fn test_model(&self) -> Result<ParamVector> {
        ParamVector::mean(self.workers.iter().map(|w| &w.state.x))
    }
}

struct EasgdThread {
    worker: EasgdWorker,
    center: Arc<CenterState>,
    obj: SharedObjective,
    cfg: RunConfig,
    easgd: EasgdConfig,
}

impl ThreadWorker for EasgdThread {
    fn run(mut self: Box<Self>, ctx: ThreadCtx) -> Result<ThreadOutcome> {
        let max = self.cfg.gossip.max_iterations;
        let record_every = self.cfg.record_every;
        let mut failure = None;
        while self.worker.state.iteration < max {
            if ctx.stop.load(Ordering::Relaxed) {
                break;
            }
            match easgd_worker_iteration(
                &mut self.worker,
                &self.center,
                self.obj.as_ref(),
                &self.cfg.gossip,
                &self.easgd,
            ) {
                Ok(report) => {
                    let t = self.worker.state.iteration;
                    let snapshot = (t.is_multiple_of(record_every) || t == max)
                        .then(|| self.worker.state.x.clone());
                    let _ = ctx.reports.send(WorkerReport {
                        worker: self.worker.state.id,
                        iteration: t,
                        raw_loss: report.raw_loss,
                        mass_balance: self.worker.state.mass_balance(),
                        msgs_sent: self.worker.state.msgs_sent(),
                        x: snapshot,
                    });
                }
                Err(e) => {
                    ctx.stop.store(true, Ordering::Relaxed);
                    failure = Some(e);
                    break;
                }
            }
            // Keep worker progress rates comparable when threads outnumber
            // cores; see the gossip runner for the rationale.
            std::thread::yield_now();
        }
        ctx.done.wait();
        match failure {
            Some(e) => Err(e),
            None => Ok(ThreadOutcome {
                worker: self.worker.state.id,
                x: self.worker.state.x.clone(),
                iterations: self.worker.state.iteration,
                mass_balance: self.worker.state.mass_balance(),
                msgs_sent: self.worker.state.msgs_sent(),
                dropped: 0,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Quadratic;
    use crate::protocol::{EtaSchedule, GossipConfig};

    #[test]
    fn refuses_to_build_without_elastic_parameters() {
        let cfg = RunConfig::new(GossipConfig {
            workers: 2,
            p: 0.5,
            eta: EtaSchedule::Constant(0.1),
            batch_size: 1,
            max_iterations: 10,
            seed: 1,
        });
        let obj: SharedObjective = Arc::new(Quadratic::random(3, 1, 0.0).unwrap());
        assert!(EasgdAlgorithm.build_sim(&cfg, obj).is_err());
    }
}
