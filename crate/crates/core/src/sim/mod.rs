//! Deterministic discrete-event simulation of executor semantics.
//!
//! [`simulate`] runs one of the five executor variants over a task set and
//! returns the complete [`ScheduleTrace`]. [`reference_np_schedule`] is an
//! independent ideal non-preemptive scheduler used as an oracle for both the
//! executors and the analytical bounds.
//!
//! Timer timestamps at or beyond the horizon are never released. Jobs that
//! were released before the horizon, and the subscriptions they activate,
//! are still executed, so every released job appears in the trace.

mod default_exec;
mod events;
mod latency;
mod metrics;
mod output;
mod priority;
mod reference;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{hyperperiod, Job, JobRef, ModelError, PriorityPolicy, TaskId, TaskSet};
use crate::time::{Duration, Instant};

pub use latency::{measure_sampled_latency, measure_sequence_latency};
pub use metrics::{compute_metrics, ChainMetrics, SimMetrics, TaskMetrics};
pub use output::{drops_csv, trace_csv};
pub use reference::reference_np_schedule;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("simulation horizon must be > 0")]
    InvalidHorizon,
    #[error("{0} cannot run with policy {1}")]
    IncompatiblePolicy(ExecutorVariant, PriorityPolicy),
    #[error("the reference scheduler needs a priority policy, got {0}")]
    NoPriority(PriorityPolicy),
    #[error("EDF undefined for deadline-less subscription {0}")]
    EdfWithoutDeadline(TaskId),
    #[error("chain {0}: no complete propagation")]
    NoCompletePropagation(u32),
    #[error("chain {0} is not a {1} chain")]
    WrongChainMode(u32, &'static str),
    #[error("unknown executor {0:?}")]
    UnknownExecutor(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecutorVariant {
    /// Polling points and processing windows over a wait set.
    Default,
    EventsFifoRO,
    EventsFifoRE,
    PriorityRO,
    PriorityRE,
}

impl ExecutorVariant {
    pub fn is_release_only(self) -> bool {
        matches!(self, ExecutorVariant::EventsFifoRO | ExecutorVariant::PriorityRO)
    }
}

impl fmt::Display for ExecutorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// How long each job actually executes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExecModel {
    Wcet,
    /// Uniform integer draw in `[min_fraction * C, C]`.
    Uniform {
        min_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    pub variant: ExecutorVariant,
    pub policy: PriorityPolicy,
    pub delta: Duration,
    /// The timer management thread preempts the default thread to release jobs.
    pub timer_thread_elevated: bool,
    pub exec_model: ExecModel,
    /// Per-subscription message queue depth (oldest message dropped on overflow).
    pub queue_depth: usize,
}

impl ExecutorConfig {
    pub fn new(variant: ExecutorVariant, policy: PriorityPolicy, delta: Duration) -> Result<Self, SimError> {
        let ok = match variant {
            ExecutorVariant::Default => true,
            ExecutorVariant::EventsFifoRO | ExecutorVariant::EventsFifoRE => policy == PriorityPolicy::Fifo,
            ExecutorVariant::PriorityRO | ExecutorVariant::PriorityRE => policy != PriorityPolicy::Fifo,
        };
        if !ok {
            return Err(SimError::IncompatiblePolicy(variant, policy));
        }
        Ok(ExecutorConfig {
            variant,
            policy,
            delta,
            timer_thread_elevated: true,
            exec_model: ExecModel::Wcet,
            queue_depth: 10,
        })
    }

    pub fn default_executor(delta: Duration) -> Self {
        Self::new(ExecutorVariant::Default, PriorityPolicy::FixedPriority, delta).expect("valid combination")
    }

    pub fn events_fifo_re(delta: Duration) -> Self {
        Self::new(ExecutorVariant::EventsFifoRE, PriorityPolicy::Fifo, delta).expect("valid combination")
    }

    pub fn priority_ro(policy: PriorityPolicy, delta: Duration) -> Result<Self, SimError> {
        Self::new(ExecutorVariant::PriorityRO, policy, delta)
    }

    pub fn priority_re(policy: PriorityPolicy, delta: Duration) -> Result<Self, SimError> {
        Self::new(ExecutorVariant::PriorityRE, policy, delta)
    }

    pub fn with_exec_model(mut self, model: ExecModel) -> Self {
        self.exec_model = model;
        self
    }

    pub fn with_elevated_timer_thread(mut self, elevated: bool) -> Self {
        self.timer_thread_elevated = elevated;
        self
    }

    pub fn with_queue_depth(mut self, depth: usize) -> Self {
        self.queue_depth = depth.max(1);
        self
    }
}

/// An executor selectable by name: one of the simulated variants, or the
/// ideal reference scheduler.
#[derive(Debug, Clone, PartialEq)]
pub enum Executor {
    Reference(PriorityPolicy),
    Sim(ExecutorConfig),
}

impl Executor {
    /// Accepts `default`, `events-fifo-ro`, `events-fifo-re`, `{rm,edf,fp}-{ro,re}`
    /// and `reference` (which takes `reference_policy`).
    pub fn from_name(name: &str, delta: Duration, reference_policy: PriorityPolicy) -> Result<Self, SimError> {
        use ExecutorVariant::*;
        use PriorityPolicy::*;
        let (variant, policy) = match name {
            "reference" => return Ok(Executor::Reference(reference_policy)),
            "default" => (Default, FixedPriority),
            "events-fifo-ro" => (EventsFifoRO, Fifo),
            "events-fifo-re" => (EventsFifoRE, Fifo),
            "rm-ro" => (PriorityRO, RateMonotonic),
            "rm-re" => (PriorityRE, RateMonotonic),
            "edf-ro" => (PriorityRO, Edf),
            "edf-re" => (PriorityRE, Edf),
            "fp-ro" => (PriorityRO, FixedPriority),
            "fp-re" => (PriorityRE, FixedPriority),
            other => return Err(SimError::UnknownExecutor(other.to_string())),
        };
        Ok(Executor::Sim(ExecutorConfig::new(variant, policy, delta)?))
    }

    pub fn run(&self, taskset: &TaskSet, horizon: Duration, seed: u64) -> Result<ScheduleTrace, SimError> {
        match self {
            Executor::Reference(policy) => reference_np_schedule(taskset, *policy, horizon),
            Executor::Sim(config) => simulate(taskset, config, horizon, seed),
        }
    }
}

impl FromStr for ExecutorVariant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(ExecutorVariant::Default),
            "events-fifo-ro" => Ok(ExecutorVariant::EventsFifoRO),
            "events-fifo-re" => Ok(ExecutorVariant::EventsFifoRE),
            "priority-ro" => Ok(ExecutorVariant::PriorityRO),
            "priority-re" => Ok(ExecutorVariant::PriorityRE),
            other => Err(SimError::UnknownExecutor(other.to_string())),
        }
    }
}

/// Timestamps skipped by one timestamp update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub task_id: TaskId,
    /// First skipped timestamp (or, for subscriptions, the overflow instant).
    pub skipped_at: Instant,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    /// Executed jobs ordered by start time.
    pub jobs: Vec<Job>,
    pub drops: Vec<DropRecord>,
    pub horizon: Duration,
}

impl ScheduleTrace {
    pub fn jobs_of(&self, task_id: TaskId) -> impl Iterator<Item = &Job> {
        self.jobs.iter().filter(move |j| j.task_id == task_id)
    }

    /// `(task, start, finish)` triples in start order.
    pub fn execution_sequence(&self) -> Vec<(TaskId, Instant, Instant)> {
        self.jobs.iter().map(|j| (j.task_id, j.start_t, j.finish_t)).collect()
    }

    pub fn dropped(&self, task_id: TaskId) -> u64 {
        self.drops.iter().filter(|d| d.task_id == task_id).map(|d| d.count).sum()
    }

    pub fn total_dropped(&self) -> u64 {
        self.drops.iter().map(|d| d.count).sum()
    }
}

/// Advances a timer timestamp to the smallest `ts + k*period` strictly after
/// `now`, returning it with the number of period boundaries jumped over.
pub fn next_timestamp(ts: Instant, period: Duration, now: Instant) -> (Instant, u64) {
    debug_assert!(now >= ts && period > 0);
    let steps = (now - ts) / period + 1;
    (ts + steps * period, steps - 1)
}

/// Largest phase plus two hyperperiods.
pub fn default_horizon(taskset: &TaskSet) -> Result<Duration, SimError> {
    let h = hyperperiod(taskset)?;
    let max_phase = taskset.timers().map(|t| t.phase).max().unwrap_or(0);
    Ok(max_phase + 2 * h)
}

/// Runs one executor variant over `horizon`.
pub fn simulate(
    taskset: &TaskSet,
    config: &ExecutorConfig,
    horizon: Duration,
    seed: u64,
) -> Result<ScheduleTrace, SimError> {
    if horizon == 0 {
        return Err(SimError::InvalidHorizon);
    }
    // re-validates the variant/policy pairing for configs built by hand
    ExecutorConfig::new(config.variant, config.policy, config.delta)?;
    if config.policy == PriorityPolicy::Edf {
        priority::KeyTable::new(taskset, config.policy)?;
    }
    let rt = Runtime::new(taskset, config, horizon, seed);
    let trace = match config.variant {
        ExecutorVariant::Default => default_exec::run(rt),
        ExecutorVariant::EventsFifoRO | ExecutorVariant::PriorityRO => events::run_release_only(rt, config)?,
        ExecutorVariant::EventsFifoRE | ExecutorVariant::PriorityRE => events::run_release_execute(rt, config)?,
    };
    Ok(trace)
}

#[derive(Debug, Clone)]
struct TimerState {
    task: usize,
    ts: Instant,
    period: Duration,
    /// Periods skipped by the last update, charged to the next released job.
    pending_skip: u64,
}

/// A released (or sampled) job that has not started yet.
#[derive(Debug, Clone)]
struct Pending {
    task: usize,
    index: u64,
    nominal: Instant,
    enqueue: Instant,
    abs_deadline: Option<Instant>,
    skipped_before: u64,
    activated_by: Option<JobRef>,
    seq: u64,
}

/// State shared by every executor variant: timers, subscription inboxes,
/// execution-time draws and the trace being recorded.
struct Runtime<'a> {
    taskset: &'a TaskSet,
    horizon: Instant,
    timers: Vec<TimerState>,
    subscribers: Vec<Vec<usize>>,
    /// Sequence numbers of not-yet-started activations, per subscription.
    inbox: Vec<VecDeque<u64>>,
    queue_depth: usize,
    next_index: Vec<u64>,
    next_seq: u64,
    exec_model: ExecModel,
    rng: ChaCha8Rng,
    jobs: Vec<Job>,
    drops: Vec<DropRecord>,
}

impl<'a> Runtime<'a> {
    fn new(taskset: &'a TaskSet, config: &ExecutorConfig, horizon: Duration, seed: u64) -> Self {
        let tasks = taskset.tasks();
        let timers = tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_timer())
            .map(|(i, t)| TimerState { task: i, ts: t.phase, period: t.period(), pending_skip: 0 })
            .collect();
        let subscribers = tasks
            .iter()
            .map(|p| {
                tasks
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| p.publishes_to.is_some() && s.subscribes_to == p.publishes_to)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Runtime {
            taskset,
            horizon,
            timers,
            subscribers,
            inbox: vec![VecDeque::new(); tasks.len()],
            queue_depth: config.queue_depth.max(1),
            next_index: vec![0; tasks.len()],
            next_seq: 0,
            exec_model: config.exec_model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            jobs: Vec::new(),
            drops: Vec::new(),
        }
    }

    fn task_id(&self, task: usize) -> TaskId {
        self.taskset.tasks()[task].id
    }

    /// Index into `timers` of the earliest eligible timer at `now`, ordered
    /// by (timestamp, priority, id).
    fn eligible_timer(&self, now: Instant) -> Option<usize> {
        self.timers
            .iter()
            .enumerate()
            .filter(|(_, t)| t.ts <= now && t.ts < self.horizon)
            .min_by_key(|(_, t)| {
                let spec = &self.taskset.tasks()[t.task];
                (t.ts, spec.priority, spec.id)
            })
            .map(|(i, _)| i)
    }

    /// Earliest timer timestamp still inside the horizon.
    fn next_timer_ts(&self) -> Option<Instant> {
        self.timers.iter().map(|t| t.ts).filter(|&ts| ts < self.horizon).min()
    }

    /// Creates the job for the timer's current timestamp without advancing it.
    fn sample_timer(&mut self, timer: usize, enqueue: Instant) -> Pending {
        let t = &self.timers[timer];
        let spec = &self.taskset.tasks()[t.task];
        let pending = Pending {
            task: t.task,
            index: self.next_index[t.task],
            nominal: t.ts,
            enqueue,
            abs_deadline: spec.deadline.map(|d| t.ts + d),
            skipped_before: t.pending_skip,
            activated_by: None,
            seq: self.next_seq,
        };
        self.next_index[t.task] += 1;
        self.next_seq += 1;
        pending
    }

    /// Advances the timer's timestamp past `now` and records skipped periods.
    fn advance_timer(&mut self, timer: usize, now: Instant) {
        let horizon = self.horizon;
        let t = &mut self.timers[timer];
        let old = t.ts;
        let (new_ts, skipped) = next_timestamp(old, t.period, now);
        t.ts = new_ts;
        // only timestamps inside the horizon count as dropped
        let inside =
            if skipped == 0 || old + t.period >= horizon { 0 } else { ((horizon - 1 - old) / t.period).min(skipped) };
        t.pending_skip = inside;
        if inside > 0 {
            let task_id = self.taskset.tasks()[t.task].id;
            self.drops.push(DropRecord { task_id, skipped_at: old + t.period, count: inside });
        }
    }

    /// Release step of the events executor: sample then advance.
    fn release_timer(&mut self, timer: usize, now: Instant, enqueue: Instant) -> Pending {
        let pending = self.sample_timer(timer, enqueue);
        self.advance_timer(timer, now);
        pending
    }

    fn exec_time(&mut self, task: usize) -> Duration {
        let wcet = self.taskset.tasks()[task].wcet;
        match self.exec_model {
            ExecModel::Wcet => wcet,
            ExecModel::Uniform { min_fraction } => {
                let lo = ((wcet as f64) * min_fraction.clamp(0.0, 1.0)).floor() as u64;
                self.rng.gen_range(lo.min(wcet)..=wcet)
            }
        }
    }

    fn record(&mut self, p: Pending, start: Instant, finish: Instant) -> JobRef {
        let job = Job {
            task_id: self.task_id(p.task),
            index: p.index,
            nominal_ts: p.nominal,
            enqueue_t: p.enqueue,
            start_t: start,
            finish_t: finish,
            abs_deadline: p.abs_deadline,
            skipped_before: p.skipped_before,
            activated_by: p.activated_by,
        };
        let r = job.job_ref();
        self.jobs.push(job);
        r
    }

    /// Activations caused by a publication of `publisher` at `now`. Each one
    /// occupies a slot in the subscriber's inbox; the returned `cancelled`
    /// list holds sequence numbers evicted by overflow.
    fn publish(&mut self, publisher: usize, source: JobRef, now: Instant) -> (Vec<Pending>, Vec<u64>) {
        let mut activations = Vec::new();
        let mut cancelled = Vec::new();
        for k in 0..self.subscribers[publisher].len() {
            let sub = self.subscribers[publisher][k];
            let spec = &self.taskset.tasks()[sub];
            let p = Pending {
                task: sub,
                index: self.next_index[sub],
                nominal: now,
                enqueue: now,
                abs_deadline: spec.deadline.map(|d| now + d),
                skipped_before: 0,
                activated_by: Some(source),
                seq: self.next_seq,
            };
            self.next_index[sub] += 1;
            self.next_seq += 1;
            if self.inbox[sub].len() >= self.queue_depth {
                if let Some(evicted) = self.inbox[sub].pop_front() {
                    cancelled.push(evicted);
                    let task_id = spec.id;
                    self.drops.push(DropRecord { task_id, skipped_at: now, count: 1 });
                }
            }
            self.inbox[sub].push_back(p.seq);
            activations.push(p);
        }
        (activations, cancelled)
    }

    /// Marks a subscription activation as started.
    fn take_from_inbox(&mut self, task: usize, seq: u64) {
        if let Some(pos) = self.inbox[task].iter().position(|&s| s == seq) {
            self.inbox[task].remove(pos);
        }
    }

    fn finish(mut self) -> ScheduleTrace {
        self.jobs.sort_by_key(|j| (j.start_t, j.finish_t));
        ScheduleTrace { jobs: self.jobs, drops: self.drops, horizon: self.horizon }
    }
}
