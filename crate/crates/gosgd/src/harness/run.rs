//! Drives one experiment to completion in either execution mode.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use crate::algo::{Algorithm, RunConfig, SimCohort, ThreadCtx, WorkerReport};
use crate::error::{Error, Result};
use crate::harness::metrics::{
    consensus_distance, MetricsWriter, RunRecord, SmoothingRing, SMOOTHING_WINDOW,
};
use crate::harness::{InterleavePolicy, ScheduleMode};
use crate::numeric::{streams, ParamVector, RandomSource};
use crate::objectives::SharedObjective;

/// Everything a finished run hands back besides the CSV.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Every row that was (or would have been) written.
    pub records: Vec<RunRecord>,
    /// Unweighted average of the final worker parameters.
    pub test_model: ParamVector,
    pub msgs_dropped: u64,
}

impl RunOutcome {
    /// The last recorded row; a finished run always has one.
    pub fn final_record(&self) -> &RunRecord {
        self.records.last().expect("a completed run records at least one row")
    }
}

/// Runs `algo` to `cfg.gossip.max_iterations`, streaming rows into `writer`
/// when given (one flush per row, so a crash loses at most the row being
/// written). Divergence aborts with the partial metrics already durable.
pub fn run_experiment(
    algo: &dyn Algorithm,
    cfg: &RunConfig,
    obj: SharedObjective,
    mode: ScheduleMode,
    writer: Option<&mut MetricsWriter>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    match mode {
        ScheduleMode::Simulation { policy } => run_simulation(algo, cfg, obj, policy, writer),
        ScheduleMode::Threaded { watchdog } => run_threaded(algo, cfg, obj, watchdog, writer),
    }
}

fn emit(
    records: &mut Vec<RunRecord>,
    writer: &mut Option<&mut MetricsWriter>,
    record: RunRecord,
) -> Result<()> {
    if let Some(w) = writer.as_deref_mut() {
        w.write(&record)?;
    }
    records.push(record);
    Ok(())
}

fn mean_finite(losses: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &l in losses {
        if l.is_finite() {
            sum += l;
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn run_simulation(
    algo: &dyn Algorithm,
    cfg: &RunConfig,
    obj: SharedObjective,
    policy: InterleavePolicy,
    mut writer: Option<&mut MetricsWriter>,
) -> Result<RunOutcome> {
    let mut cohort = algo.build_sim(cfg, obj)?;
    let m = cohort.workers();
    let max = cfg.gossip.max_iterations;
    let batch = cfg.gossip.batch_size as u64;
    let mut scheduler = RandomSource::new(cfg.gossip.seed, streams::SCHEDULER);
    let mut ring = SmoothingRing::new(SMOOTHING_WINDOW);
    let mut records = Vec::new();
    let mut order: Vec<usize> = (0..m).collect();
    let mut losses = vec![f64::NAN; m];

    for t in 1..=max {
        if let InterleavePolicy::SeededRandom = policy {
            for (k, slot) in order.iter_mut().enumerate() {
                *slot = k;
            }
            scheduler.shuffle(&mut order);
        }
        for &i in &order {
            losses[i] = cohort.step_worker(i)?;
        }
        // The smoothing window sees batch losses regardless of worker, in
        // worker-id order so the stream does not depend on the interleaving.
        for &l in &losses {
            if l.is_finite() {
                ring.push(l);
            }
        }
        if t.is_multiple_of(cfg.record_every) && t != max {
            let record = simulation_row(t, batch, &losses, &ring, cohort.as_ref(), 0)?;
            emit(&mut records, &mut writer, record)?;
        }
    }

    let dropped = cohort.settle()?;
    let record = simulation_row(max, batch, &losses, &ring, cohort.as_ref(), dropped)?;
    emit(&mut records, &mut writer, record)?;
    let test_model = cohort.test_model()?;
    Ok(RunOutcome {
        records,
        test_model,
        msgs_dropped: dropped,
    })
}

fn simulation_row(
    t: u64,
    batch: u64,
    losses: &[f64],
    ring: &SmoothingRing,
    cohort: &dyn SimCohort,
    dropped: u64,
) -> Result<RunRecord> {
    Ok(RunRecord {
        iter: t,
        images_per_worker: t * batch,
        // Wall time is meaningless under sequential simulation and would
        // break the identical-bytes determinism contract.
        wall_s: 0.0,
        loss_raw: mean_finite(losses),
        loss_smooth50: ring.mean(),
        consensus_dist: consensus_distance(&cohort.snapshot_xs())?,
        alpha_mass: cohort.alpha_mass(),
        msgs_sent: cohort.msgs_sent(),
        msgs_dropped: dropped,
    })
}

/// Per-iteration aggregation of one round's worker reports.
struct RoundAccum {
    losses: Vec<f64>,
    seen: Vec<bool>,
    xs: Vec<Option<ParamVector>>,
    mass: f64,
    msgs: u64,
    remaining: usize,
}

impl RoundAccum {
    fn new(workers: usize) -> Self {
        RoundAccum {
            losses: vec![f64::NAN; workers],
            seen: vec![false; workers],
            xs: vec![None; workers],
            mass: 0.0,
            msgs: 0,
            remaining: workers,
        }
    }

    fn absorb(&mut self, report: WorkerReport) -> Result<()> {
        let i = report.worker;
        if i >= self.seen.len() {
            return Err(Error::domain(format!("report from unknown worker {i}")));
        }
        if self.seen[i] {
            return Err(Error::domain(format!(
                "worker {i} reported iteration {} twice",
                report.iteration
            )));
        }
        self.seen[i] = true;
        self.losses[i] = report.raw_loss;
        self.xs[i] = report.x;
        self.mass += report.mass_balance;
        self.msgs += report.msgs_sent;
        self.remaining -= 1;
        Ok(())
    }

    fn complete(&self) -> bool {
        self.remaining == 0
    }

    fn snapshots(&self) -> Result<Vec<ParamVector>> {
        self.xs
            .iter()
            .cloned()
            .map(|x| x.ok_or_else(|| Error::domain("recording round missing a snapshot")))
            .collect()
    }
}

fn run_threaded(
    algo: &dyn Algorithm,
    cfg: &RunConfig,
    obj: SharedObjective,
    watchdog: Duration,
    mut writer: Option<&mut MetricsWriter>,
) -> Result<RunOutcome> {
    let workers = algo.build_threaded(cfg, obj)?;
    let m = workers.len();
    let max = cfg.gossip.max_iterations;
    let batch = cfg.gossip.batch_size as u64;

    let (tx, rx) = mpsc::channel::<WorkerReport>();
    let stop = Arc::new(AtomicBool::new(false));
    let done = Arc::new(Barrier::new(m));
    let started = Instant::now();

    let mut handles = Vec::with_capacity(m);
    for (i, worker) in workers.into_iter().enumerate() {
        let ctx = ThreadCtx {
            reports: tx.clone(),
            stop: Arc::clone(&stop),
            done: Arc::clone(&done),
        };
        let handle = thread::Builder::new()
            .name(format!("worker-{i}"))
            .spawn(move || worker.run(ctx))
            .map_err(|e| Error::domain(format!("could not spawn worker thread: {e}")))?;
        handles.push(handle);
    }
    // The collector holds no sender, so the channel disconnects exactly when
    // the last worker finishes.
    drop(tx);

    let mut ring = SmoothingRing::new(SMOOTHING_WINDOW);
    let mut records = Vec::new();
    let mut pending: BTreeMap<u64, RoundAccum> = BTreeMap::new();
    let mut last_losses = vec![f64::NAN; m];

    let collected: Result<()> = loop {
        match rx.recv_timeout(watchdog) {
            Ok(report) => {
                let acc = pending
                    .entry(report.iteration)
                    .or_insert_with(|| RoundAccum::new(m));
                if let Err(e) = acc.absorb(report) {
                    break Err(e);
                }
                // Each worker reports its iterations in order, so rounds
                // complete strictly front-first; pop while the front is done.
                let flushed: Result<()> = loop {
                    let front_done = pending.first_key_value().is_some_and(|(_, a)| a.complete());
                    if !front_done {
                        break Ok(());
                    }
                    let (t, acc) = pending.pop_first().expect("front exists");
                    for &l in &acc.losses {
                        if l.is_finite() {
                            ring.push(l);
                        }
                    }
                    last_losses.copy_from_slice(&acc.losses);
                    if t.is_multiple_of(cfg.record_every) && t != max {
                        let xs = match acc.snapshots() {
                            Ok(xs) => xs,
                            Err(e) => break Err(e),
                        };
                        let record = RunRecord {
                            iter: t,
                            images_per_worker: t * batch,
                            wall_s: started.elapsed().as_secs_f64(),
                            loss_raw: mean_finite(&acc.losses),
                            loss_smooth50: ring.mean(),
                            consensus_dist: match consensus_distance(&xs) {
                                Ok(d) => d,
                                Err(e) => break Err(e),
                            },
                            alpha_mass: acc.mass,
                            msgs_sent: acc.msgs,
                            msgs_dropped: 0,
                        };
                        if let Err(e) = emit(&mut records, &mut writer, record) {
                            break Err(e);
                        }
                    }
                };
                if let Err(e) = flushed {
                    break Err(e);
                }
            }
            // All senders dropped: every worker has returned.
            Err(RecvTimeoutError::Disconnected) => break Ok(()),
            Err(RecvTimeoutError::Timeout) => {
                // No worker made progress for the whole watchdog window. The
                // push-only protocol cannot deadlock, so treat this as the
                // defect it is. Do not join — a wedged thread would hang us.
                stop.store(true, Ordering::Relaxed);
                return Err(Error::domain(format!(
                    "threaded run stalled: no worker progress within {watchdog:?}"
                )));
            }
        }
    };
    if collected.is_err() {
        // Release the workers; they run to completion or bail on the flag.
        stop.store(true, Ordering::Relaxed);
    }

    let mut outcomes = Vec::with_capacity(m);
    let mut first_failure = None;
    for handle in handles {
        match handle.join() {
            Ok(Ok(outcome)) => outcomes.push(outcome),
            Ok(Err(e)) => first_failure = first_failure.or(Some(e)),
            Err(_) => {
                first_failure =
                    first_failure.or_else(|| Some(Error::domain("a worker thread panicked")))
            }
        }
    }
    collected?;
    if let Some(e) = first_failure {
        return Err(e);
    }

    outcomes.sort_by_key(|o| o.worker);
    let dropped: u64 = outcomes.iter().map(|o| o.dropped).sum();
    let xs: Vec<ParamVector> = outcomes.iter().map(|o| o.x.clone()).collect();
    let record = RunRecord {
        iter: max,
        images_per_worker: max * batch,
        wall_s: started.elapsed().as_secs_f64(),
        loss_raw: mean_finite(&last_losses),
        loss_smooth50: ring.mean(),
        consensus_dist: consensus_distance(&xs)?,
        alpha_mass: outcomes.iter().map(|o| o.mass_balance).sum(),
        msgs_sent: outcomes.iter().map(|o| o.msgs_sent).sum(),
        msgs_dropped: dropped,
    };
    emit(&mut records, &mut writer, record)?;
    let test_model = ParamVector::mean(xs.iter())?;
    Ok(RunOutcome {
        records,
        test_model,
        msgs_dropped: dropped,
    })
}
