//! Acceptance suite: one test per shipped claim, each printing a
//! `criterion N (label): PASS` line (run with `--nocapture` to see them).
//!
//! The numeric workloads are deterministic — simulation runs reproduce
//! bit-for-bit — so the asserted margins are exact reruns of calibrated
//! results, not statistical hopes. The one genuinely nondeterministic piece
//! (criterion 9's threaded repeats) asserts a bracket, not a value.

use std::sync::Arc;
use std::time::{Duration, Instant};

use gosgd::algo::{lookup, RunConfig};
use gosgd::baselines::EasgdConfig;
use gosgd::datagen::{generate, DataKind};
use gosgd::harness::{
    check_gradients, consensus_decay_experiment, run_experiment, MetricsWriter, ScheduleMode,
};
use gosgd::numeric::{streams, ParamVector, RandomSource};
use gosgd::objectives::{Logistic, Mlp, Quadratic, SharedObjective};
use gosgd::protocol::{
    init_workers, mixing_iteration, mixing_process, total_mass, EtaSchedule, GossipConfig,
    InstantNetwork, WorkerState,
};

/// Prints the per-criterion verdict line and fails the test on FAIL.
fn criterion(n: u32, label: &str, pass: bool, detail: String) {
    if pass {
        println!("criterion {n} ({label}): PASS [{detail}]");
    } else {
        println!("criterion {n} ({label}): FAIL [{detail}]");
        panic!("criterion {n} ({label}) failed: {detail}");
    }
}

fn within(elapsed: Duration, budget_s: u64) -> bool {
    elapsed <= Duration::from_secs(budget_s)
}

/// Mixing-only config used by the conservation sweeps.
fn mixing_config(seed: u64) -> GossipConfig {
    GossipConfig {
        workers: 8,
        p: 1.0,
        eta: EtaSchedule::Constant(0.1), // never read: gradients are off
        batch_size: 1,
        max_iterations: 1,
        seed,
    }
}

/// Eight workers at distinct random points, α = 1/M, plus an empty network.
fn mixing_cohort(seed: u64, dim: usize) -> (Vec<WorkerState>, InstantNetwork) {
    let m = 8;
    let mut init = RandomSource::new(seed, streams::INIT);
    let workers: Vec<WorkerState> = (0..m)
        .map(|id| {
            let x = ParamVector::from_vec((0..dim).map(|_| init.uniform(-0.5, 0.5)).collect())
                .expect("uniform draws are finite");
            WorkerState::new(id, x, 1.0 / m as f64, seed)
        })
        .collect();
    (workers, InstantNetwork::new(m))
}

fn linf(v: &ParamVector) -> f64 {
    v.values().iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn linf_diff(a: &ParamVector, b: &ParamVector) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// 10⁴ randomized mixing events: 100 seeds × 100 single-worker events in
/// scheduler-drawn order, Σα checked against 1 after every event.
#[test]
fn criterion_1_mass_conservation() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let cfg = mixing_config(seed);
        let (mut workers, mut net) = mixing_cohort(seed, 16);
        let mut scheduler = RandomSource::new(seed, streams::SCHEDULER);
        for _ in 0..100 {
            let i = scheduler.index(workers.len());
            let mut view = net.view(i);
            mixing_iteration(&mut workers[i], &cfg, &mut view).expect("mixing never fails");
            let (mass, _) = total_mass(&workers, net.in_flight()).expect("non-empty cohort");
            worst = worst.max((mass - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    criterion(
        1,
        "mass conservation",
        worst <= 1e-12 && within(elapsed, 10),
        format!("max |Σα − 1| = {worst:.3e} ≤ 1e-12 over 10⁴ events, {elapsed:.2?}"),
    );
}

/// Same sweeps: Σα·x stays put relative to its starting value, and after the
/// system is mixed to consensus and drained every worker sits on the initial
/// average.
#[test]
fn criterion_2_weighted_sum_conservation() {
    let start = Instant::now();
    let mut worst_rel = 0.0f64;
    let mut worst_consensus = 0.0f64;
    for seed in 0..100u64 {
        let cfg = mixing_config(seed);
        let (mut workers, mut net) = mixing_cohort(seed, 16);
        let initial_mean = ParamVector::mean(workers.iter().map(|w| &w.x)).expect("8 workers");
        let (_, s0) = total_mass(&workers, net.in_flight()).expect("non-empty cohort");
        let scale = 1.0f64.max(linf(&s0));
        let mut scheduler = RandomSource::new(seed, streams::SCHEDULER);
        for _ in 0..100 {
            let i = scheduler.index(workers.len());
            let mut view = net.view(i);
            mixing_iteration(&mut workers[i], &cfg, &mut view).expect("mixing never fails");
            let (_, ws) = total_mass(&workers, net.in_flight()).expect("non-empty cohort");
            worst_rel = worst_rel.max(linf_diff(&ws, &s0) / scale);
        }
        // Mix to consensus, then drain: p = 1 contracts the spread to the
        // rounding floor well inside 200 rounds, and processing passes with
        // no further pushes empty the queues.
        for _ in 0..200 {
            for (i, w) in workers.iter_mut().enumerate() {
                let mut view = net.view(i);
                mixing_iteration(w, &cfg, &mut view).expect("mixing never fails");
            }
        }
        while net.in_flight().next().is_some() {
            for (i, w) in workers.iter_mut().enumerate() {
                let mut view = net.view(i);
                mixing_process(w, &mut view).expect("processing never fails");
            }
        }
        for w in &workers {
            worst_consensus = worst_consensus.max(
                w.x.l2_distance(&initial_mean)
                    .expect("matching dimensions"),
            );
        }
    }
    let elapsed = start.elapsed();
    criterion(
        2,
        "weighted-sum conservation",
        worst_rel <= 1e-10 && worst_consensus <= 1e-9 && within(elapsed, 10),
        format!(
            "max rel drift = {worst_rel:.3e} ≤ 1e-10, drained consensus off initial mean by \
             {worst_consensus:.3e} ≤ 1e-9, {elapsed:.2?}"
        ),
    );
}

/// Mixing-only decay of max_i ‖x_i − x̄‖ is log-linear above the rounding
/// floor. The fit is over one pinned realization: the max-over-workers
/// statistic has seed-dependent plateau noise, so the seed pins a
/// representative run rather than averaging many.
#[test]
fn criterion_3_exponential_consensus() {
    let start = Instant::now();
    let cfg = GossipConfig {
        workers: 8,
        p: 1.0,
        eta: EtaSchedule::Constant(0.1), // never read: gradients are off
        batch_size: 1,
        max_iterations: 1,
        seed: 5,
    };
    let fit = consensus_decay_experiment(&cfg, 100, 1.0, 60).expect("valid config");
    let elapsed = start.elapsed();
    criterion(
        3,
        "exponential consensus",
        fit.r_squared > 0.99 && fit.slope < 0.0 && fit.points >= 10 && within(elapsed, 5),
        format!(
            "R² = {:.5} > 0.99, slope = {:.3e} per message over {} points, {elapsed:.2?}",
            fit.r_squared, fit.slope, fit.points
        ),
    );
}

/// Analytic gradients of all three objectives agree with central finite
/// differences at 20 random probes each.
#[test]
fn criterion_4_gradient_oracle() {
    let start = Instant::now();
    let moons = Arc::new(generate(DataKind::TwoMoons, 400, 0.25, 11).expect("valid datagen"));
    let objectives: Vec<(&str, SharedObjective)> = vec![
        (
            "quadratic",
            Arc::new(Quadratic::random(50, 11, 1e-4).expect("valid config")),
        ),
        (
            "logistic",
            Arc::new(Logistic::new(Arc::clone(&moons), 1e-4).expect("valid config")),
        ),
        (
            "mlp",
            Arc::new(Mlp::new(Arc::clone(&moons), 16, 1e-4).expect("valid config")),
        ),
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, obj) in &objectives {
        let worst = check_gradients(obj.as_ref(), 11, 20, 16).expect("probing succeeds");
        pass &= worst < 1e-5;
        detail.push(format!("{name} {worst:.2e}"));
    }
    let elapsed = start.elapsed();
    criterion(
        4,
        "gradient oracle",
        pass && within(elapsed, 30),
        format!("max rel error < 1e-5: {}, {elapsed:.2?}", detail.join(", ")),
    );
}

/// Collapsing the gossip (one worker, or p = 0) reproduces plain SGD
/// bit-for-bit, which pins the RNG stream discipline: gossip draws must
/// never perturb data draws.
#[test]
fn criterion_5_degenerate_equivalences() {
    let start = Instant::now();

    // (a) One worker, gossip coins still flipping — identical to a
    // hand-rolled SGD loop on the same streams.
    let eta = 0.05;
    let cfg1 = GossipConfig {
        workers: 1,
        p: 0.5,
        eta: EtaSchedule::Constant(eta),
        batch_size: 4,
        max_iterations: 200,
        seed: 99,
    };
    let moons = Arc::new(generate(DataKind::TwoMoons, 200, 0.25, 3).expect("valid datagen"));
    let obj: SharedObjective =
        Arc::new(Logistic::new(Arc::clone(&moons), 1e-4).expect("valid config"));
    let gosgd = lookup("gosgd").expect("registered");
    let mut solo = gosgd
        .build_sim(&RunConfig::new(cfg1.clone()), Arc::clone(&obj))
        .expect("valid config");
    for _ in 0..cfg1.max_iterations {
        solo.step_worker(0).expect("finite updates");
    }
    let mut hand = init_workers(&cfg1, obj.as_ref())
        .expect("valid config")
        .remove(0);
    for _ in 0..cfg1.max_iterations {
        let batch = obj
            .sample_batch(&mut hand.data_rng, cfg1.batch_size)
            .expect("valid batch size");
        let (_, g) = obj.loss_and_gradient(&hand.x, &batch).expect("finite");
        hand.x = ParamVector::axpy(-eta, &g, &hand.x).expect("finite");
    }
    let single_matches = solo.snapshot_xs()[0].bits_eq(&hand.x);

    // (b) p = 0 with four workers — per-worker bitwise equal to the naive
    // cohort, including per-step losses, under a decaying step size.
    let cfg4 = GossipConfig {
        workers: 4,
        p: 0.0,
        eta: EtaSchedule::InverseTime {
            eta0: 0.1,
            decay: 1e-3,
        },
        batch_size: 8,
        max_iterations: 200,
        seed: 42,
    };
    let mut silent = gosgd
        .build_sim(&RunConfig::new(cfg4.clone()), Arc::clone(&obj))
        .expect("valid config");
    let mut naive = lookup("naive")
        .expect("registered")
        .build_sim(&RunConfig::new(cfg4.clone()), Arc::clone(&obj))
        .expect("valid config");
    let mut p0_matches = true;
    for _ in 0..cfg4.max_iterations {
        for i in 0..cfg4.workers {
            let a = silent.step_worker(i).expect("finite updates");
            let b = naive.step_worker(i).expect("finite updates");
            p0_matches &= a.to_bits() == b.to_bits();
        }
    }
    for (a, b) in silent.snapshot_xs().iter().zip(naive.snapshot_xs().iter()) {
        p0_matches &= a.bits_eq(b);
    }

    let elapsed = start.elapsed();
    criterion(
        5,
        "degenerate equivalences",
        single_matches && p0_matches && within(elapsed, 5),
        format!(
            "GoSGD(M=1) == plain SGD: {single_matches}; GoSGD(p=0) == naive per worker: \
             {p0_matches}; {elapsed:.2?}"
        ),
    );
}

/// Sparse gossip on the quadratic bowl drives the averaged test model onto
/// the analytic optimum.
#[test]
fn criterion_6_convex_convergence() {
    let start = Instant::now();
    let obj: SharedObjective = Arc::new(Quadratic::random(50, 1, 0.0).expect("valid config"));
    let optimum = obj.optimum().expect("quadratic has a closed form");
    let cfg = RunConfig::new(GossipConfig {
        workers: 8,
        p: 0.02,
        eta: EtaSchedule::Constant(0.1),
        batch_size: 1,
        max_iterations: 2000,
        seed: 1,
    });
    let outcome = run_experiment(
        lookup("gosgd").expect("registered"),
        &cfg,
        obj,
        ScheduleMode::simulation(),
        None,
    )
    .expect("run completes");
    let dist = outcome
        .test_model
        .l2_distance(&optimum)
        .expect("matching dimensions");
    let elapsed = start.elapsed();
    criterion(
        6,
        "convex convergence",
        dist < 1e-6 && within(elapsed, 5),
        format!("‖test model − x*‖ = {dist:.3e} < 1e-6, {elapsed:.2?}"),
    );
}

/// The criterion-7 workload: MLP on two-moons, 8 workers, 20k iterations,
/// shared seed. Calibrated so both margins hold deterministically; the
/// config is reused verbatim by criterion 9.
fn figure1_workload() -> (RunConfig, SharedObjective) {
    let moons = Arc::new(generate(DataKind::TwoMoons, 2000, 0.25, 1).expect("valid datagen"));
    let obj: SharedObjective = Arc::new(Mlp::new(moons, 16, 0.0).expect("valid config"));
    let cfg = RunConfig::new(GossipConfig {
        workers: 8,
        p: 0.02,
        eta: EtaSchedule::Constant(0.25),
        batch_size: 8,
        max_iterations: 20_000,
        seed: 8,
    });
    (cfg, obj)
}

/// Figure-1 ordering at desk scale: sparse gossip beats no-exchange on both
/// smoothed loss and consensus tightness (the latter by 10×).
#[test]
fn criterion_7_figure1_ordering() {
    let start = Instant::now();
    let (cfg, obj) = figure1_workload();
    let gossip = run_experiment(
        lookup("gosgd").expect("registered"),
        &cfg,
        Arc::clone(&obj),
        ScheduleMode::simulation(),
        None,
    )
    .expect("run completes");
    let naive = run_experiment(
        lookup("naive").expect("registered"),
        &cfg,
        obj,
        ScheduleMode::simulation(),
        None,
    )
    .expect("run completes");
    let (g, n) = (gossip.final_record(), naive.final_record());
    let loss_ordered = g.loss_smooth50 < n.loss_smooth50;
    let consensus_ordered = g.consensus_dist < 0.1 * n.consensus_dist;
    let elapsed = start.elapsed();
    criterion(
        7,
        "figure-1 ordering",
        loss_ordered && consensus_ordered && within(elapsed, 300),
        format!(
            "smoothed loss {:.4} < {:.4}; consensus {:.3} < 0.1 × {:.3}; {elapsed:.2?}",
            g.loss_smooth50, n.loss_smooth50, g.consensus_dist, n.consensus_dist
        ),
    );
}

/// EASGD sanity: with every coupling off it is plain SGD bit-for-bit, and
/// with the published constants it converges on the quadratic at a step
/// size explicitly checked against the heavy-ball stability bound.
#[test]
fn criterion_8_easgd_baseline() {
    let start = Instant::now();

    // (a) μ = 0, α_e = 0, M = 1, τ = 1 — every coupling disabled.
    let cfg1 = GossipConfig {
        workers: 1,
        p: 0.02, // easgd ignores p; τ is what matters
        eta: EtaSchedule::Constant(0.05),
        batch_size: 4,
        max_iterations: 200,
        seed: 7,
    };
    let moons = Arc::new(generate(DataKind::TwoMoons, 200, 0.25, 3).expect("valid datagen"));
    let obj: SharedObjective =
        Arc::new(Logistic::new(Arc::clone(&moons), 1e-4).expect("valid config"));
    let mut decoupled = RunConfig::new(cfg1.clone());
    decoupled.easgd = Some(EasgdConfig {
        elastic_alpha: 0.0,
        momentum: 0.0,
        tau: 1,
    });
    let mut elastic = lookup("easgd")
        .expect("registered")
        .build_sim(&decoupled, Arc::clone(&obj))
        .expect("valid config");
    let mut plain = lookup("naive")
        .expect("registered")
        .build_sim(&RunConfig::new(cfg1.clone()), Arc::clone(&obj))
        .expect("valid config");
    let mut decoupled_matches = true;
    for _ in 0..cfg1.max_iterations {
        let a = elastic.step_worker(0).expect("finite updates");
        let b = plain.step_worker(0).expect("finite updates");
        decoupled_matches &= a.to_bits() == b.to_bits();
    }
    decoupled_matches &= elastic.snapshot_xs()[0].bits_eq(&plain.snapshot_xs()[0]);

    // (b) Published constants on the quadratic. The bowl's curvature is
    // 1 + decay, so heavy-ball stability needs η·(1 + decay) < 2·(1 + μ);
    // η = 0.1 sits far inside it, and the momentum-limited contraction of
    // √μ per step reaches 1e-4 comfortably within 4000 iterations.
    let (mu, alpha_e, tau) = (0.99, 0.887, 50);
    let decay = 0.0;
    let eta = 0.1;
    let stability_ok = eta * (1.0 + decay) < 2.0 * (1.0 + mu);
    let obj_q: SharedObjective = Arc::new(Quadratic::random(50, 2, decay).expect("valid config"));
    let optimum = obj_q.optimum().expect("quadratic has a closed form");
    let mut paper = RunConfig::new(GossipConfig {
        workers: 4,
        p: 0.02,
        eta: EtaSchedule::Constant(eta),
        batch_size: 1,
        max_iterations: 4000,
        seed: 2,
    });
    paper.easgd = Some(EasgdConfig {
        elastic_alpha: alpha_e,
        momentum: mu,
        tau,
    });
    let outcome = run_experiment(
        lookup("easgd").expect("registered"),
        &paper,
        obj_q,
        ScheduleMode::simulation(),
        None,
    )
    .expect("run completes");
    let dist = outcome
        .test_model
        .l2_distance(&optimum)
        .expect("matching dimensions");

    let elapsed = start.elapsed();
    criterion(
        8,
        "easgd baseline",
        decoupled_matches && stability_ok && dist < 1e-4 && within(elapsed, 10),
        format!(
            "decoupled == plain SGD: {decoupled_matches}; η stability margin \
             {:.2} < {:.2}; ‖test model − x*‖ = {dist:.3e} < 1e-4; {elapsed:.2?}",
            eta * (1.0 + decay),
            2.0 * (1.0 + mu)
        ),
    );
}

/// Determinism and liveness: equal simulation configs give byte-identical
/// CSVs, and ten threaded repeats of the criterion-7 workload all finish
/// under the watchdog with the simulation's final loss inside their spread.
#[test]
fn criterion_9_determinism_and_threading() {
    let start = Instant::now();
    let (cfg, obj) = figure1_workload();
    let dir = tempfile::tempdir().expect("tempdir");
    let gosgd = lookup("gosgd").expect("registered");

    let run_sim = |name: &str| {
        let path = dir.path().join(name);
        let mut writer = MetricsWriter::create(&path).expect("writable tempdir");
        let outcome = run_experiment(
            gosgd,
            &cfg,
            Arc::clone(&obj),
            ScheduleMode::simulation(),
            Some(&mut writer),
        )
        .expect("run completes");
        (std::fs::read(path).expect("file exists"), outcome)
    };
    let (bytes_a, sim) = run_sim("a.csv");
    let (bytes_b, _) = run_sim("b.csv");
    let byte_identical = bytes_a == bytes_b;

    let sim_loss = sim.final_record().loss_smooth50;
    let mut finals = Vec::with_capacity(10);
    for _ in 0..10 {
        let outcome = run_experiment(
            gosgd,
            &cfg,
            Arc::clone(&obj),
            ScheduleMode::threaded(),
            None,
        )
        .expect("completes under the watchdog — a timeout here is a deadlock defect");
        finals.push(outcome.final_record().loss_smooth50);
    }
    let lo = finals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bracketed = lo <= sim_loss && sim_loss <= hi;

    let elapsed = start.elapsed();
    criterion(
        9,
        "determinism and threading",
        byte_identical && bracketed,
        format!(
            "sim CSVs byte-identical: {byte_identical}; 10 threaded finals \
             [{lo:.4}, {hi:.4}] bracket sim {sim_loss:.4}: {bracketed}; {elapsed:.2?}"
        ),
    );
}
