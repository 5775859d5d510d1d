//! The gossip algorithm behind the strategy interface.

use std::sync::atomic::Ordering;

use crate::algo::{
    reject_easgd_params, Algorithm, RunConfig, SimCohort, ThreadCtx, ThreadOutcome, ThreadWorker,
    WorkerReport,
};
use crate::error::Result;
use crate::numeric::ParamVector;
use crate::objectives::SharedObjective;
use crate::protocol::{
    channel_mesh, init_workers, mixing_process, test_model, total_mass, worker_iteration,
    ChannelTransport, GossipTransport, InstantNetwork, WorkerState,
};

pub struct GosgdAlgorithm;

impl Algorithm for GosgdAlgorithm {
    fn name(&self) -> &'static str {
        "gosgd"
    }

    fn build_sim(&self, cfg: &RunConfig, obj: SharedObjective) -> Result<Box<dyn SimCohort>> {
        reject_easgd_params(cfg, self.name())?;
        cfg.validate()?;
        let workers = init_workers(&cfg.gossip, obj.as_ref())?;
        let net = InstantNetwork::new(workers.len());
        Ok(Box::new(GosgdSim {
            workers,
            net,
            obj,
            cfg: cfg.clone(),
            dropped: 0,
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
        let mesh = channel_mesh(workers.len());
        Ok(workers
            .into_iter()
            .zip(mesh)
            .map(|(state, transport)| {
                Box::new(GosgdThread {
                    state,
                    transport,
                    obj: obj.clone(),
                    cfg: cfg.clone(),
                }) as Box<dyn ThreadWorker>
            })
            .collect())
    }
}

struct GosgdSim {
    workers: Vec<WorkerState>,
    net: InstantNetwork,
    obj: SharedObjective,
    cfg: RunConfig,
    dropped: u64,
}

impl SimCohort for GosgdSim {
    fn workers(&self) -> usize {
        self.workers.len()
    }

    fn step_worker(&mut self, i: usize) -> Result<f64> {
        let report = worker_iteration(
            &mut self.workers[i],
            self.obj.as_ref(),
            &self.cfg.gossip,
            &mut self.net.view(i),
        )?;
        Ok(report.raw_loss)
    }

    fn snapshot_xs(&self) -> Vec<ParamVector> {
        self.workers.iter().map(|w| w.x.clone()).collect()
    }

    fn alpha_mass(&self) -> f64 {
        total_mass(&self.workers, self.net.in_flight())
            .map(|(mass, _)| mass)
            .unwrap_or(f64::NAN)
    }

    fn msgs_sent(&self) -> u64 {
        self.workers.iter().map(|w| w.msgs_sent()).sum()
    }

    fn settle(&mut self) -> Result<u64> {
        for i in 0..self.workers.len() {
            mixing_process(&mut self.workers[i], &mut self.net.view(i))?;
        }
        // Nothing pushes during the drain, so the queues must be empty now.
        self.dropped += self.net.queued() as u64;
        Ok(self.dropped)
    }

    fn test_model(&self) -> Result<ParamVector> {
        test_model(&self.workers)
    }
}

struct GosgdThread {
    state: WorkerState,
    transport: ChannelTransport,
    obj: SharedObjective,
    cfg: RunConfig,
}

impl ThreadWorker for GosgdThread {
    fn run(mut self: Box<Self>, ctx: ThreadCtx) -> Result<ThreadOutcome> {
        let max = self.cfg.gossip.max_iterations;
        let record_every = self.cfg.record_every;
        let mut failure = None;
        while self.state.iteration < max {
            if ctx.stop.load(Ordering::Relaxed) {
                break;
            }
            match worker_iteration(
                &mut self.state,
                self.obj.as_ref(),
                &self.cfg.gossip,
                &mut self.transport,
            ) {
                Ok(report) => {
                    let t = self.state.iteration;
                    let snapshot = (t.is_multiple_of(record_every) || t == max)
                        .then(|| self.state.x.clone());
                    let _ = ctx.reports.send(WorkerReport {
                        worker: self.state.id,
                        iteration: t,
                        raw_loss: report.raw_loss,
                        mass_balance: self.state.mass_balance(),
                        msgs_sent: self.state.msgs_sent(),
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
            // cores: without this, one worker can run thousands of steps per
            // OS timeslice and its peers consume gossip that is equally
            // stale, which is not the homogeneous-worker regime the
            // protocol assumes.
            std::thread::yield_now();
        }
        // Everyone must arrive here before anyone drains: after the barrier
        // no worker can push again, so one processing pass empties the
        // system for good.
        ctx.done.wait();
        let mut dropped = 0;
        if failure.is_none() {
            mixing_process(&mut self.state, &mut self.transport)?;
        } else {
            // A diverged worker still absorbs nothing but must not strand
            // queued α silently; count what it leaves behind.
            while self.transport.try_pop().is_some() {
                dropped += 1;
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(ThreadOutcome {
                worker: self.state.id,
                x: self.state.x.clone(),
                iterations: self.state.iteration,
                mass_balance: self.state.mass_balance(),
                msgs_sent: self.state.msgs_sent(),
                dropped,
            }),
        }
    }
}
