//! Asynchronous consensus ADMM with a partial barrier and bounded delay.
//!
//! The coordinator caches the latest local iterate of every worker. A global
//! update fires once at least `n_a` workers have reported since the previous
//! one and no unreported worker has already missed `k_a` updates. Only the
//! reporters get a dual update and a new assignment `(z, u_j, ρ)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::thread;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::admm::{
    consensus_update, validate_problem, x_step, AdmmConfig, AdmmRun, AdmmTrace, AsyncRowInfo, StopReason, XStep,
};
use crate::error::{Error, Result};
use crate::problem::{ConsensusState, Subproblem};
use crate::random::seeded_rng;
use crate::solvers::trace::Stopwatch;

/// Compute time of one worker task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Latency {
    Fixed(f64),
    Uniform {
        low: f64,
        high: f64,
    },
    /// `high` with probability `p_high`, else `low`.
    TwoPoint {
        low: f64,
        high: f64,
        p_high: f64,
    },
}

impl Latency {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Latency::Fixed(t) => t > 0.0 && t.is_finite(),
            Latency::Uniform { low, high } => low > 0.0 && high >= low && high.is_finite(),
            Latency::TwoPoint { low, high, p_high } => {
                low > 0.0 && high > 0.0 && high.is_finite() && low.is_finite() && (0.0..=1.0).contains(&p_high)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "latency must be positive and finite: {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Latency::Fixed(t) => t,
            Latency::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..high)
                } else {
                    low
                }
            }
            Latency::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < p_high {
                    high
                } else {
                    low
                }
            }
        }
    }

    /// Scales every support point by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Latency::Fixed(t) => Latency::Fixed(t * factor),
            Latency::Uniform { low, high } => Latency::Uniform {
                low: low * factor,
                high: high * factor,
            },
            Latency::TwoPoint { low, high, p_high } => Latency::TwoPoint {
                low: low * factor,
                high: high * factor,
                p_high,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scheduler {
    /// Seeded discrete-event simulation; reproducible bit for bit.
    Simulated { seed: u64, latencies: Vec<Latency> },
    /// One thread per worker, message passing only.
    Parallel,
}

/// Which locals enter the z-step of an asynchronous update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZMode {
    /// Every cached `x_j`, stale ones included.
    #[default]
    AllCached,
    /// Only the workers that reported for this update. Not validated.
    ReportersOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsyncConfig {
    pub n_a: usize,
    pub k_a: usize,
    pub scheduler: Scheduler,
    pub z_mode: ZMode,
    pub admm: AdmmConfig,
    /// Makes this worker panic on its first task (parallel mode), to exercise
    /// the abort path.
    pub fault_worker: Option<usize>,
}

impl AsyncConfig {
    /// Simulated scheduler with equal fixed latencies.
    pub fn simulated(parts: usize, n_a: usize, k_a: usize, seed: u64, admm: AdmmConfig) -> Self {
        Self {
            n_a,
            k_a,
            scheduler: Scheduler::Simulated {
                seed,
                latencies: vec![Latency::Fixed(1.0); parts],
            },
            z_mode: ZMode::AllCached,
            admm,
            fault_worker: None,
        }
    }

    fn validate(&self, parts: usize) -> Result<()> {
        if !(1..=parts).contains(&self.n_a) {
            return Err(Error::InvalidArgument(format!(
                "n_a must be in 1..={parts}, got {}",
                self.n_a
            )));
        }
        if self.k_a == 0 {
            return Err(Error::InvalidArgument("k_a must be at least 1".into()));
        }
        if let Scheduler::Simulated { latencies, .. } = &self.scheduler {
            if latencies.len() != parts {
                return Err(Error::DimensionMismatch {
                    context: "worker latencies",
                    expected: parts,
                    actual: latencies.len(),
                });
            }
            latencies.iter().try_for_each(Latency::validate)?;
        }
        Ok(())
    }
}

/// A worker finishing its task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportEvent {
    pub worker: usize,
    /// Global update count when the task was assigned.
    pub version: usize,
    pub time: f64,
}

impl Eq for ReportEvent {}

impl Ord for ReportEvent {
    // reversed so that BinaryHeap pops the earliest (time, worker) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.worker.cmp(&self.worker))
    }
}

impl PartialOrd for ReportEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Discrete-event clock: tasks are dispatched with a sampled latency and
/// reported in `(time, worker)` order.
#[derive(Debug, Clone)]
pub struct SimulatedScheduler {
    rng: ChaCha8Rng,
    latencies: Vec<Latency>,
    pending: BinaryHeap<ReportEvent>,
}

impl SimulatedScheduler {
    pub fn new(seed: u64, latencies: Vec<Latency>) -> Result<Self> {
        latencies.iter().try_for_each(Latency::validate)?;
        Ok(Self {
            rng: seeded_rng(seed),
            latencies,
            pending: BinaryHeap::new(),
        })
    }

    pub fn dispatch(&mut self, worker: usize, now: f64, version: usize) {
        let time = now + self.latencies[worker].sample(&mut self.rng);
        self.pending.push(ReportEvent { worker, version, time });
    }

    pub fn next_event(&mut self) -> Option<ReportEvent> {
        self.pending.pop()
    }
}

/// The first `count` reports when every worker is re-dispatched as soon as it
/// reports.
pub fn simulated_scheduler(seed: u64, latencies: &[Latency], count: usize) -> Result<Vec<ReportEvent>> {
    let mut sched = SimulatedScheduler::new(seed, latencies.to_vec())?;
    for j in 0..latencies.len() {
        sched.dispatch(j, 0.0, 0);
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let Some(ev) = sched.next_event() else { break };
        sched.dispatch(ev.worker, ev.time, ev.version + 1);
        out.push(ev);
    }
    Ok(out)
}

/// A worker assignment.
#[derive(Debug, Clone)]
struct Task {
    z: Vec<f64>,
    u: Vec<f64>,
    rho: f64,
}

fn snapshot(state: &ConsensusState, j: usize) -> Task {
    Task {
        z: state.z.clone(),
        u: state.u[j].clone(),
        rho: state.rho,
    }
}

/// Coordinator state shared by both schedulers.
struct Coordinator<'a> {
    subs: &'a [Subproblem],
    cfg: &'a AsyncConfig,
    truth: Option<&'a [f64]>,
    state: ConsensusState,
    trace: AdmmTrace,
    reported: Vec<bool>,
    reporters: Vec<usize>,
    inner_failures: usize,
}

enum Step {
    Waiting,
    /// A global update happened; these workers need new tasks.
    Updated(Vec<usize>),
    Done(StopReason),
}

impl<'a> Coordinator<'a> {
    fn new(subs: &'a [Subproblem], cfg: &'a AsyncConfig, truth: Option<&'a [f64]>) -> Self {
        let parts = subs.len();
        Self {
            subs,
            cfg,
            truth,
            state: ConsensusState::new(parts, subs[0].prior.x_ref().to_vec(), cfg.admm.rho0),
            trace: AdmmTrace::default(),
            reported: vec![false; parts],
            reporters: Vec::new(),
            inner_failures: 0,
        }
    }

    fn ready(&self) -> bool {
        self.reporters.len() >= self.cfg.n_a
            && (0..self.subs.len()).all(|i| self.reported[i] || self.state.staleness[i] < self.cfg.k_a)
    }

    fn report(&mut self, worker: usize, step: XStep, time_s: f64) -> Result<Step> {
        self.state.x[worker] = step.x;
        self.inner_failures += usize::from(!step.converged);
        self.state.staleness[worker] = 0;
        if !self.reported[worker] {
            self.reported[worker] = true;
            self.reporters.push(worker);
        }
        if !self.ready() {
            return Ok(Step::Waiting);
        }
        let mut reporters = std::mem::take(&mut self.reporters);
        reporters.sort_unstable();
        let mut update = match self.cfg.z_mode {
            ZMode::AllCached => consensus_update(
                self.subs,
                &mut self.state,
                &reporters,
                &self.cfg.admm,
                self.truth,
                time_s,
            )?,
            ZMode::ReportersOnly => {
                // z-step over the reporters only, then the usual bookkeeping
                let sub_subs: Vec<Subproblem> = reporters.iter().map(|&j| self.subs[j].clone()).collect();
                let mut sub_state = ConsensusState {
                    z: self.state.z.clone(),
                    x: reporters.iter().map(|&j| self.state.x[j].clone()).collect(),
                    u: reporters.iter().map(|&j| self.state.u[j].clone()).collect(),
                    rho: self.state.rho,
                    iter: self.state.iter,
                    staleness: vec![0; reporters.len()],
                };
                let all: Vec<usize> = (0..reporters.len()).collect();
                let mut up = consensus_update(&sub_subs, &mut sub_state, &all, &self.cfg.admm, self.truth, time_s)?;
                for (k, &j) in reporters.iter().enumerate() {
                    self.state.u[j] = std::mem::take(&mut sub_state.u[k]);
                }
                self.state.z = sub_state.z;
                self.state.rho = sub_state.rho;
                self.state.iter = sub_state.iter;
                let mut misfit = 0.0;
                for s in self.subs {
                    misfit += s.misfit(&self.state.z)?;
                }
                up.row.misfit = misfit;
                up
            }
        };
        for (i, r) in self.reported.iter_mut().enumerate() {
            if !*r {
                self.state.staleness[i] += 1;
            }
            *r = false;
        }
        let max_staleness = self.state.staleness.iter().copied().max().unwrap_or(0);
        if max_staleness > self.cfg.k_a {
            let worker = self
                .state
                .staleness
                .iter()
                .position(|&s| s == max_staleness)
                .unwrap_or(0);
            return Err(Error::BoundedDelay {
                worker,
                staleness: max_staleness,
                bound: self.cfg.k_a,
            });
        }
        update.row.inner_failures = std::mem::take(&mut self.inner_failures);
        update.row.async_info = Some(AsyncRowInfo {
            updates: self.state.iter,
            reporters: reporters.clone(),
            max_staleness,
        });
        self.trace.push(update.row);
        if update.converged {
            Ok(Step::Done(StopReason::Converged))
        } else if self.state.iter >= self.cfg.admm.max_outer {
            Ok(Step::Done(StopReason::MaxIterations))
        } else {
            Ok(Step::Updated(reporters))
        }
    }

    fn finish(self, stop: StopReason) -> AdmmRun {
        AdmmRun {
            state: self.state,
            trace: self.trace,
            stop,
        }
    }
}

/// Asynchronous consensus ADMM; `admm.max_outer` bounds the number of
/// global updates.
pub fn run_async(subs: &[Subproblem], cfg: &AsyncConfig, truth: Option<&[f64]>) -> Result<AdmmRun> {
    validate_problem(subs, truth, &cfg.admm)?;
    cfg.validate(subs.len())?;
    match &cfg.scheduler {
        Scheduler::Simulated { seed, latencies } => run_simulated(subs, cfg, truth, *seed, latencies),
        Scheduler::Parallel => run_parallel(subs, cfg, truth),
    }
}

fn run_simulated(
    subs: &[Subproblem],
    cfg: &AsyncConfig,
    truth: Option<&[f64]>,
    seed: u64,
    latencies: &[Latency],
) -> Result<AdmmRun> {
    let mut coord = Coordinator::new(subs, cfg, truth);
    let mut sched = SimulatedScheduler::new(seed, latencies.to_vec())?;
    let mut tasks: Vec<Option<Task>> = (0..subs.len()).map(|j| Some(snapshot(&coord.state, j))).collect();
    for j in 0..subs.len() {
        sched.dispatch(j, 0.0, 0);
    }
    while let Some(ev) = sched.next_event() {
        let j = ev.worker;
        let task = tasks[j].take().expect("a reporting worker has an assignment");
        let step = match x_step(&subs[j], &task.z, &task.u, task.rho, &coord.state.x[j], &cfg.admm.inner) {
            Ok(s) => s,
            Err(e) => {
                let message = e.to_string();
                return Ok(coord.finish(StopReason::Failed { worker: j, message }));
            }
        };
        match coord.report(j, step, ev.time)? {
            Step::Waiting => {}
            Step::Updated(reporters) => {
                for r in reporters {
                    tasks[r] = Some(snapshot(&coord.state, r));
                    sched.dispatch(r, ev.time, coord.state.iter);
                }
            }
            Step::Done(stop) => return Ok(coord.finish(stop)),
        }
    }
    unreachable!("workers are always in flight until the run stops")
}

type Report = (usize, Result<XStep>);

fn run_parallel(subs: &[Subproblem], cfg: &AsyncConfig, truth: Option<&[f64]>) -> Result<AdmmRun> {
    let watch = Stopwatch::start(cfg.admm.clock);
    let mut coord = Coordinator::new(subs, cfg, truth);
    let (report_tx, report_rx) = mpsc::channel::<Report>();
    thread::scope(|scope| {
        let mut task_txs = Vec::with_capacity(subs.len());
        for (j, sub) in subs.iter().enumerate() {
            let (task_tx, task_rx) = mpsc::channel::<Task>();
            let report_tx = report_tx.clone();
            let mut x_prev = coord.state.x[j].clone();
            let inner = &cfg.admm.inner;
            let fault = cfg.fault_worker == Some(j);
            scope.spawn(move || {
                for task in task_rx {
                    let result = catch_unwind(AssertUnwindSafe(|| {
                        if fault {
                            panic!("injected fault in worker {j}");
                        }
                        x_step(sub, &task.z, &task.u, task.rho, &x_prev, inner)
                    }))
                    .unwrap_or_else(|payload| {
                        let message = payload
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "worker panicked".into());
                        Err(Error::WorkerFailed { worker: j, message })
                    });
                    if let Ok(step) = &result {
                        x_prev.clone_from(&step.x);
                    }
                    let failed = result.is_err();
                    if report_tx.send((j, result)).is_err() || failed {
                        break;
                    }
                }
            });
            task_txs.push(task_tx);
        }
        drop(report_tx);
        for (j, tx) in task_txs.iter().enumerate() {
            // a closed channel surfaces below as a failed report
            let _ = tx.send(snapshot(&coord.state, j));
        }
        let stop = loop {
            let Ok((j, result)) = report_rx.recv() else {
                break StopReason::Failed {
                    worker: usize::MAX,
                    message: "all workers disconnected".into(),
                };
            };
            let step = match result {
                Ok(s) => s,
                Err(e) => {
                    break StopReason::Failed {
                        worker: j,
                        message: e.to_string(),
                    }
                }
            };
            let time_s = watch.seconds((coord.state.iter + 1) as f64);
            match coord.report(j, step, time_s) {
                Ok(Step::Waiting) => {}
                Ok(Step::Updated(reporters)) => {
                    for r in reporters {
                        let _ = task_txs[r].send(snapshot(&coord.state, r));
                    }
                }
                Ok(Step::Done(stop)) => break stop,
                Err(e) => {
                    break StopReason::Failed {
                        worker: j,
                        message: e.to_string(),
                    }
                }
            }
        };
        // closing the task channels lets every worker thread return
        drop(task_txs);
        Ok(coord.finish(stop))
    })
}
