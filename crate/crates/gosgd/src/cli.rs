//! Command-line wiring: flags → configs → harness runs → exit codes.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 dataset
//! ingestion / I/O error, 3 divergence (non-finite parameters), 4 gradient
//! check exceeded tolerance.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::algo::{lookup, Algorithm, RunConfig};
use crate::baselines::EasgdConfig;
use crate::datagen::{generate, write_dataset_csv, DataKind};
use crate::error::{Error, Result};
use crate::harness::{
    check_gradients, consensus_decay_experiment, figure1_protocol, run_experiment,
    InterleavePolicy, MetricsWriter, ScheduleMode,
};
use crate::objectives::{load_csv_dataset, Logistic, Mlp, Quadratic, SharedObjective};
use crate::protocol::{EtaSchedule, GossipConfig};

/// Paper-style default for the sparse gossip rate.
const DEFAULT_P: f64 = 0.02;
/// `check-grad` passes below this max relative error.
const GRAD_TOLERANCE: f64 = 1e-5;

/// Prints a status line, swallowing write errors so `gosgd … | head`
/// exits cleanly instead of panicking when the pipe closes early.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// `say!` for stderr.
macro_rules! say_err {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stderr(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "gosgd",
    version,
    about = "Asynchronous decentralized SGD with sum-weight gossip mixing",
    after_help = "Exit codes: 0 ok, 1 usage/config, 2 ingestion/io, 3 divergence, 4 gradient check failed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with one of the registered algorithms and write metrics CSV.
    Train(TrainArgs),
    /// Measure mixing-only consensus decay (gradients off).
    Consensus(ConsensusArgs),
    /// Run the two-panel comparison: loss vs images and loss vs wall clock.
    Figure1(Figure1Args),
    /// Generate a synthetic two-class dataset CSV.
    GenData(GenDataArgs),
    /// Cross-check analytic gradients against finite differences.
    CheckGrad(CheckGradArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveKind {
    /// ½‖x − x*‖² with an analytic optimum; needs no dataset.
    Quadratic,
    /// Binary logistic regression on a CSV dataset.
    Logistic,
    /// One-hidden-layer tanh MLP with logistic output on a CSV dataset.
    Mlp,
}

#[derive(Args, Clone)]
struct ObjectiveArgs {
    /// Which objective to optimize.
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Quadratic)]
    objective: ObjectiveKind,
    /// Training CSV for the data-driven objectives (logistic, mlp).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Label column: header name, or zero-based index for headerless use.
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Hidden-layer width of the MLP.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// L2 weight decay added to every objective.
    #[arg(long, default_value_t = 1e-4)]
    decay: f64,
    /// Dimension of the synthetic quadratic.
    #[arg(long, default_value_t = 50)]
    dim: usize,
}

impl ObjectiveArgs {
    fn build(&self, seed: u64) -> Result<SharedObjective> {
        match self.objective {
            ObjectiveKind::Quadratic => {
                if self.dataset.is_some() {
                    return Err(Error::config(
                        "--dataset does not apply to the quadratic objective",
                    ));
                }
                Ok(Arc::new(Quadratic::random(self.dim, seed, self.decay)?))
            }
            ObjectiveKind::Logistic => {
                let data = Arc::new(self.load_dataset()?);
                Ok(Arc::new(Logistic::new(data, self.decay)?))
            }
            ObjectiveKind::Mlp => {
                let data = Arc::new(self.load_dataset()?);
                Ok(Arc::new(Mlp::new(data, self.hidden, self.decay)?))
            }
        }
    }

    fn load_dataset(&self) -> Result<crate::objectives::Dataset> {
        let path = self.dataset.as_ref().ok_or_else(|| {
            Error::config(format!(
                "the {:?} objective needs --dataset <csv>",
                self.objective
            ))
        })?;
        load_csv_dataset(path, &self.label_column)
    }

    fn manifest(&self, obj: &SharedObjective) -> ObjectiveManifest {
        ObjectiveManifest {
            kind: format!("{:?}", self.objective).to_lowercase(),
            description: obj.describe(),
            dataset: self.dataset.as_ref().map(|p| p.display().to_string()),
            label_column: self.dataset.is_some().then(|| self.label_column.clone()),
            decay: self.decay,
        }
    }
}

#[derive(Serialize)]
struct ObjectiveManifest {
    kind: String,
    description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_column: Option<String>,
    decay: f64,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Number of workers M.
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Learning rate η (initial value when --eta-decay is set).
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Inverse-time decay d: η_t = η / (1 + d·t).
    #[arg(long)]
    eta_decay: Option<f64>,
    /// Mini-batch size per iteration.
    #[arg(long, default_value_t = 128)]
    batch: usize,
    /// Iterations per worker.
    #[arg(long, default_value_t = 10_000)]
    iterations: u64,
    /// Master seed; every stream in the run derives from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Emit a metrics row every this many iterations.
    #[arg(long, default_value_t = 10)]
    record_every: u64,
}

impl RunArgs {
    fn eta_schedule(&self) -> EtaSchedule {
        match self.eta_decay {
            None => EtaSchedule::Constant(self.eta),
            Some(decay) => EtaSchedule::InverseTime {
                eta0: self.eta,
                decay,
            },
        }
    }

    fn gossip(&self, p: f64) -> GossipConfig {
        GossipConfig {
            workers: self.workers,
            p,
            eta: self.eta_schedule(),
            batch_size: self.batch,
            max_iterations: self.iterations,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    /// Deterministic single-threaded simulation.
    Sim,
    /// One OS thread per worker; measures wall clock.
    Threaded,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Interleave {
    /// Fresh seeded permutation of workers every simulated round.
    Random,
    /// Workers step in id order.
    RoundRobin,
}

fn schedule_mode(mode: Mode, interleave: Interleave) -> ScheduleMode {
    match mode {
        Mode::Threaded => ScheduleMode::threaded(),
        Mode::Sim => ScheduleMode::Simulation {
            policy: match interleave {
                Interleave::Random => InterleavePolicy::SeededRandom,
                Interleave::RoundRobin => InterleavePolicy::RoundRobin,
            },
        },
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Algorithm: gosgd, easgd, or naive.
    #[arg(long, default_value = "gosgd")]
    algo: String,
    /// Per-iteration gossip push probability (default 0.02).
    #[arg(long)]
    p: Option<f64>,
    /// Elastic exchange period; easgd only, defaults to round(1/p).
    #[arg(long)]
    tau: Option<u64>,
    /// Momentum μ; easgd only (default 0.99).
    #[arg(long)]
    momentum: Option<f64>,
    /// Elastic coupling strength; easgd only (default 0.887).
    #[arg(long)]
    elastic_alpha: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, value_enum, default_value_t = Mode::Sim)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Interleave::Random)]
    interleave: Interleave,
    /// Metrics CSV path; the resolved config lands at <out>.config.json.
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
}

impl TrainArgs {
    /// Flag validation mirrors module preconditions: flags that do not apply
    /// to the chosen algorithm are rejected, not ignored.
    fn resolve(&self) -> Result<(&'static dyn Algorithm, RunConfig)> {
        let algo = lookup(&self.algo)?;
        let elastic = algo.name() == "easgd";
        if !elastic {
            for (flag, given) in [
                ("--tau", self.tau.is_some()),
                ("--momentum", self.momentum.is_some()),
                ("--elastic-alpha", self.elastic_alpha.is_some()),
            ] {
                if given {
                    return Err(Error::config(format!(
                        "{flag} applies only to easgd, not '{}'",
                        algo.name()
                    )));
                }
            }
        }
        if elastic && self.p.is_some() && self.tau.is_some() {
            return Err(Error::config(
                "--p and --tau both set the elastic exchange rate; give only one",
            ));
        }
        let p = match (elastic, self.tau) {
            // τ chosen directly: report the equivalent rate in the config.
            (true, Some(tau)) if tau > 0 => 1.0 / tau as f64,
            _ => self.p.unwrap_or(DEFAULT_P),
        };
        let mut cfg = RunConfig::new(self.run.gossip(p));
        cfg.record_every = self.run.record_every;
        if elastic {
            let tau = match self.tau {
                Some(tau) => tau,
                None => EasgdConfig::tau_from_p(p)?,
            };
            cfg.easgd = Some(EasgdConfig {
                elastic_alpha: self.elastic_alpha.unwrap_or(0.887),
                momentum: self.momentum.unwrap_or(0.99),
                tau,
            });
        }
        cfg.validate()?;
        Ok((algo, cfg))
    }
}

#[derive(Serialize)]
struct TrainManifest<'a> {
    command: &'static str,
    algo: &'a str,
    mode: String,
    objective: ObjectiveManifest,
    gossip: &'a GossipConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    easgd: Option<EasgdConfig>,
    record_every: u64,
    out: String,
}

fn write_manifest(out: &Path, manifest: &impl Serialize) -> Result<()> {
    let path = manifest_path(out);
    let file = File::create(&path)?;
    serde_json::to_writer_pretty(&file, manifest)
        .map_err(|e| Error::domain(format!("could not write manifest: {e}")))?;
    use std::io::Write;
    writeln!(&file)?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.config.json", out.display()))
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let (algo, cfg) = args.resolve()?;
    let obj = args.objective.build(cfg.gossip.seed)?;
    write_manifest(
        &args.out,
        &TrainManifest {
            command: "train",
            algo: algo.name(),
            mode: format!("{:?}/{:?}", args.mode, args.interleave).to_lowercase(),
            objective: args.objective.manifest(&obj),
            gossip: &cfg.gossip,
            easgd: cfg.easgd,
            record_every: cfg.record_every,
            out: args.out.display().to_string(),
        },
    )?;
    let mut writer = MetricsWriter::create(&args.out)?;
    let mode = schedule_mode(args.mode, args.interleave);
    let outcome = run_experiment(algo, &cfg, obj, mode, Some(&mut writer))?;
    let last = outcome.final_record();
    say!(
        "{} finished: iter={} loss_raw={:.6} loss_smooth50={:.6} consensus={:.3e} msgs={} dropped={}",
        algo.name(),
        last.iter,
        last.loss_raw,
        last.loss_smooth50,
        last.consensus_dist,
        last.msgs_sent,
        last.msgs_dropped,
    );
    say!("metrics: {}", args.out.display());
    Ok(0)
}

#[derive(Args)]
struct ConsensusArgs {
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Push probability during the mixing-only run.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Parameter dimension.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Width of the initial uniform spread across workers.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Gossip rounds (one iteration per worker per round).
    #[arg(long, default_value_t = 60)]
    rounds: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sample CSV path (`round,messages,max_dist`).
    #[arg(long, default_value = "consensus.csv")]
    out: PathBuf,
}

#[derive(Serialize)]
struct ConsensusManifest {
    command: &'static str,
    workers: usize,
    p: f64,
    dim: usize,
    spread: f64,
    rounds: u64,
    seed: u64,
    out: String,
}

fn cmd_consensus(args: ConsensusArgs) -> Result<i32> {
    let cfg = GossipConfig {
        workers: args.workers,
        p: args.p,
        // Gradients are off in this experiment; the rate is never read.
        eta: EtaSchedule::Constant(0.1),
        batch_size: 1,
        max_iterations: 1,
        seed: args.seed,
    };
    write_manifest(
        &args.out,
        &ConsensusManifest {
            command: "consensus",
            workers: args.workers,
            p: args.p,
            dim: args.dim,
            spread: args.spread,
            rounds: args.rounds,
            seed: args.seed,
            out: args.out.display().to_string(),
        },
    )?;
    let fit = consensus_decay_experiment(&cfg, args.dim, args.spread, args.rounds)?;
    let mut w = csv::Writer::from_path(&args.out).map_err(csv_to_error)?;
    w.write_record(["round", "messages", "max_dist"])
        .map_err(csv_to_error)?;
    for (round, (messages, dist)) in fit.samples.iter().enumerate() {
        w.write_record([
            round.to_string(),
            messages.to_string(),
            dist.to_string(),
        ])
        .map_err(csv_to_error)?;
    }
    w.flush()?;
    say!(
        "slope per message: {:.6e}  R²: {:.6}  points: {}{}",
        fit.slope,
        fit.r_squared,
        fit.points,
        if fit.truncated {
            "  (hit the 1e-12 floor; fit covers the prefix above it)"
        } else {
            ""
        }
    );
    say!("samples: {}", args.out.display());
    Ok(0)
}

fn csv_to_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::domain(format!("csv write failed: {other:?}")),
    }
}

#[derive(Args)]
struct Figure1Args {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    /// Push probability for the sparse (wall-clock) panel.
    #[arg(long, default_value_t = DEFAULT_P)]
    sparse_p: f64,
    #[arg(long, default_value_t = 0.99)]
    momentum: f64,
    #[arg(long, default_value_t = 0.887)]
    elastic_alpha: f64,
    /// Directory receiving the six per-run CSVs.
    #[arg(long, default_value = "figure1")]
    outdir: PathBuf,
}

#[derive(Serialize)]
struct Figure1Manifest<'a> {
    command: &'static str,
    objective: ObjectiveManifest,
    gossip: &'a GossipConfig,
    sparse_p: f64,
    momentum: f64,
    elastic_alpha: f64,
    record_every: u64,
    outdir: String,
}

fn cmd_figure1(args: Figure1Args) -> Result<i32> {
    fs::create_dir_all(&args.outdir)?;
    let obj = args.objective.build(args.run.seed)?;
    let base = args.run.gossip(args.sparse_p);
    let easgd = EasgdConfig {
        elastic_alpha: args.elastic_alpha,
        momentum: args.momentum,
        tau: 1, // overridden per panel from the panel's exchange rate
    };
    write_manifest(
        &args.outdir.join("figure1"),
        &Figure1Manifest {
            command: "figure1",
            objective: args.objective.manifest(&obj),
            gossip: &base,
            sparse_p: args.sparse_p,
            momentum: args.momentum,
            elastic_alpha: args.elastic_alpha,
            record_every: args.run.record_every,
            outdir: args.outdir.display().to_string(),
        },
    )?;
    let runs = figure1_protocol(
        obj,
        &base,
        easgd,
        args.sparse_p,
        args.run.record_every,
        &args.outdir,
    )?;
    for run in &runs {
        let last = run.outcome.final_record();
        say!(
            "{:<6} {:<6} loss_smooth50={:.6} consensus={:.3e} wall_s={:.2} → {}",
            format!("{:?}", run.panel).to_lowercase(),
            run.algo,
            last.loss_smooth50,
            last.consensus_dist,
            last.wall_s,
            run.path.display(),
        );
    }
    Ok(0)
}

#[derive(Args)]
struct GenDataArgs {
    /// two-cluster (linearly separable) or two-moons (not).
    #[arg(long, default_value = "two-moons")]
    kind: String,
    /// Number of examples (classes alternate, so use an even n for balance).
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Noise scale; defaults to the kind's natural value.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "data.csv")]
    out: PathBuf,
}

#[derive(Serialize)]
struct GenDataManifest {
    command: &'static str,
    kind: String,
    n: usize,
    noise: f64,
    seed: u64,
    out: String,
}

fn cmd_gen_data(args: GenDataArgs) -> Result<i32> {
    let kind: DataKind = args.kind.parse()?;
    let noise = args.noise.unwrap_or_else(|| kind.default_noise());
    let data = generate(kind, args.n, noise, args.seed)?;
    write_manifest(
        &args.out,
        &GenDataManifest {
            command: "gen-data",
            kind: kind.to_string(),
            n: args.n,
            noise,
            seed: args.seed,
            out: args.out.display().to_string(),
        },
    )?;
    write_dataset_csv(&data, &args.out)?;
    say!(
        "wrote {} examples of {} (noise {noise}) to {}",
        data.len(),
        kind,
        args.out.display()
    );
    Ok(0)
}

#[derive(Args)]
struct CheckGradArgs {
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Random (x, batch) probes per objective.
    #[arg(long, default_value_t = 20)]
    probes: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
}

fn cmd_check_grad(args: CheckGradArgs) -> Result<i32> {
    let obj = args.objective.build(args.seed)?;
    let worst = check_gradients(obj.as_ref(), args.seed, args.probes, args.batch)?;
    say!(
        "max relative gradient error over {} probes: {worst:.3e}",
        args.probes
    );
    if worst < GRAD_TOLERANCE {
        Ok(0)
    } else {
        say_err!("analytic gradient disagrees with finite differences (tolerance {GRAD_TOLERANCE:e})");
        Ok(4)
    }
}

/// Full dispatch; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Consensus(args) => cmd_consensus(args),
        Command::Figure1(args) => cmd_figure1(args),
        Command::GenData(args) => cmd_gen_data(args),
        Command::CheckGrad(args) => cmd_check_grad(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            say_err!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } => 1,
        Error::Ingestion { .. } | Error::Io(_) => 2,
        Error::Divergence { .. } | Error::NonFinite { .. } => 3,
    }
}
