//! Independent workers with no exchange of any kind.

use std::sync::atomic::Ordering;

use crate::algo::{
    reject_easgd_params, Algorithm, RunConfig, SimCohort, ThreadCtx, ThreadOutcome, ThreadWorker,
    WorkerReport,
};
use crate::baselines::naive_worker_iteration;
use crate::error::Result;
use crate::numeric::ParamVector;
use crate::objectives::SharedObjective;
use crate::protocol::{init_workers, WorkerState};

pub struct NaiveAlgorithm;

impl Algorithm for NaiveAlgorithm {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn build_sim(&self, cfg: &RunConfig, obj: SharedObjective) -> Result<Box<dyn SimCohort>> {
        reject_easgd_params(cfg, self.name())?;
        cfg.validate()?;
        let workers = init_workers(&cfg.gossip, obj.as_ref())?;
        Ok(Box::new(NaiveSim {
            workers,
            obj,
            cfg: cfg.clone(),
        }))
    }

    fn build_threaded(
        &self,
        cfg: &RunConfig,
        obj: SharedObjective,
    ) -> Result<Vec<Box<dyn ThreadWorker>>> {
        reject_easgd_params(cfg, self.name())?;
        cfg.validate()?;
        let workers = init_workers(&cfg.gossip, obj.as_ref())?;
        Ok(workers
            .into_iter()
            .map(|state| {
                Box::new(NaiveThread {
                    state,
                    obj: obj.clone(),
                    cfg: cfg.clone(),
                }) as Box<dyn ThreadWorker>
            })
            .collect())
    }
}

struct NaiveSim {
    workers: Vec<WorkerState>,
    obj: SharedObjective,
    cfg: RunConfig,
}

impl SimCohort for NaiveSim {
    fn workers(&self) -> usize {
        self.workers.len()
    }

    fn step_worker(&mut self, i: usize) -> Result<f64> {
        naive_worker_iteration(&mut self.workers[i], self.obj.as_ref(), &self.cfg.gossip)
    }

    fn snapshot_xs(&self) -> Vec<ParamVector> {
        self.workers.iter().map(|w| w.x.clone()).collect()
    }

    fn alpha_mass(&self) -> f64 {
        self.workers.iter().map(|w| w.mass_balance()).sum()
    }

    fn msgs_sent(&self) -> u64 {
        0
    }

    fn settle(&mut self) -> Result<u64> {
        Ok(0)
    }

    fn test_model(&self) -> Result<ParamVector> {
        ParamVector::mean(self.workers.iter().map(|w| &w.x))
    }
}

struct NaiveThread {
    state: WorkerState,
    obj: SharedObjective,
    cfg: RunConfig,
}

impl ThreadWorker for NaiveThread {
    fn run(mut self: Box<Self>, ctx: ThreadCtx) -> Result<ThreadOutcome> {
        let max = self.cfg.gossip.max_iterations;
        let record_every = self.cfg.record_every;
        let mut failure = None;
        while self.state.iteration < max {
            if ctx.stop.load(Ordering::Relaxed) {
                break;
            }
            match naive_worker_iteration(&mut self.state, self.obj.as_ref(), &self.cfg.gossip) {
                Ok(raw_loss) => {
                    let t = self.state.iteration;
                    let snapshot = (t.is_multiple_of(record_every) || t == max)
                        .then(|| self.state.x.clone());
                    let _ = ctx.reports.send(WorkerReport {
                        worker: self.state.id,
                        iteration: t,
                        raw_loss,
                        mass_balance: self.state.mass_balance(),
                        msgs_sent: 0,
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
                worker: self.state.id,
                x: self.state.x.clone(),
                iterations: self.state.iteration,
                mass_balance: self.state.mass_balance(),
                msgs_sent: 0,
                dropped: 0,
            }),
        }
    }
}
