//! Task, job and chain types shared by the simulator and the analysis.

mod file;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Duration, Instant};

pub use file::{FileError, Workload};

pub type TaskId = u32;
pub type TopicId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate task id {0}")]
    DuplicateId(TaskId),
    #[error("tasks {0} and {1} share priority {2}")]
    DuplicatePriority(TaskId, TaskId, u32),
    #[error("timer {0} needs a period > 0")]
    MissingPeriod(TaskId),
    #[error("task {0}: deadline must be > 0")]
    ZeroDeadline(TaskId),
    #[error("task {0}: deadline {1} ns exceeds period {2} ns (only constrained deadlines are supported)")]
    UnconstrainedDeadline(TaskId, Duration, Duration),
    #[error("timer {0} has no deadline")]
    MissingDeadline(TaskId),
    #[error("subscription {0} does not subscribe to any topic")]
    MissingTopic(TaskId),
    #[error("subscription {0} cannot have a phase")]
    SubscriptionPhase(TaskId),
    #[error("empty hyperperiod")]
    EmptyHyperperiod,
    #[error("hyperperiod overflows the time base")]
    HyperperiodOverflow,
    #[error("no static priority assignment exists for {0}")]
    NoStaticAssignment(PriorityPolicy),
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
    #[error("chain {0}: {1}")]
    InvalidChain(u32, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Timer,
    Subscription,
}

/// One periodic timer or publication-driven subscription.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub kind: TaskKind,
    pub wcet: Duration,
    /// Timer period, or the declared minimum inter-arrival of a subscription.
    pub period: Option<Duration>,
    /// Relative deadline. Always set for timers; optional for subscriptions.
    pub deadline: Option<Duration>,
    pub phase: Duration,
    /// Lower value means higher priority.
    pub priority: u32,
    pub subscribes_to: Option<TopicId>,
    pub publishes_to: Option<TopicId>,
}

impl TaskSpec {
    /// A timer with an implicit deadline, zero phase and priority equal to its id.
    pub fn timer(id: TaskId, wcet: Duration, period: Duration) -> Self {
        TaskSpec {
            id,
            kind: TaskKind::Timer,
            wcet,
            period: Some(period),
            deadline: Some(period),
            phase: 0,
            priority: id,
            subscribes_to: None,
            publishes_to: None,
        }
    }

    pub fn subscription(id: TaskId, wcet: Duration, topic: TopicId) -> Self {
        TaskSpec {
            id,
            kind: TaskKind::Subscription,
            wcet,
            period: None,
            deadline: None,
            phase: 0,
            priority: id,
            subscribes_to: Some(topic),
            publishes_to: None,
        }
    }

    pub fn with_deadline(mut self, deadline: Duration) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn with_phase(mut self, phase: Duration) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_priority(mut self, priority: u32) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_period(mut self, period: Duration) -> Self {
        self.period = Some(period);
        self
    }

    pub fn publishing(mut self, topic: TopicId) -> Self {
        self.publishes_to = Some(topic);
        self
    }

    pub fn is_timer(&self) -> bool {
        self.kind == TaskKind::Timer
    }

    /// Timer period; panics on a subscription without a declared inter-arrival.
    pub fn period(&self) -> Duration {
        self.period.expect("task has no period")
    }

    fn validate(&self) -> Result<(), ModelError> {
        match self.kind {
            TaskKind::Timer => {
                let period = self.period.filter(|&p| p > 0).ok_or(ModelError::MissingPeriod(self.id))?;
                let deadline = self.deadline.ok_or(ModelError::MissingDeadline(self.id))?;
                if deadline > period {
                    return Err(ModelError::UnconstrainedDeadline(self.id, deadline, period));
                }
            }
            TaskKind::Subscription => {
                if self.subscribes_to.is_none() {
                    return Err(ModelError::MissingTopic(self.id));
                }
                if self.phase != 0 {
                    return Err(ModelError::SubscriptionPhase(self.id));
                }
                if let (Some(deadline), Some(period)) = (self.deadline, self.period) {
                    if deadline > period {
                        return Err(ModelError::UnconstrainedDeadline(self.id, deadline, period));
                    }
                }
            }
        }
        if self.deadline == Some(0) {
            return Err(ModelError::ZeroDeadline(self.id));
        }
        Ok(())
    }
}

/// A validated set of tasks plus the per-release overhead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSet {
    name: String,
    tasks: Vec<TaskSpec>,
    delta: Duration,
}

impl TaskSet {
    pub fn new(name: impl Into<String>, tasks: Vec<TaskSpec>, delta: Duration) -> Result<Self, ModelError> {
        let set = TaskSet { name: name.into(), tasks, delta };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let mut ids = BTreeSet::new();
        let mut priorities = std::collections::BTreeMap::new();
        for task in &self.tasks {
            task.validate()?;
            if !ids.insert(task.id) {
                return Err(ModelError::DuplicateId(task.id));
            }
            if let Some(other) = priorities.insert(task.priority, task.id) {
                return Err(ModelError::DuplicatePriority(other, task.id, task.priority));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn delta(&self) -> Duration {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn index_of(&self, id: TaskId) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    pub fn timers(&self) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.iter().filter(|t| t.is_timer())
    }

    pub fn is_timers_only(&self) -> bool {
        self.tasks.iter().all(TaskSpec::is_timer)
    }

    /// Sum of C/T over every task with a period.
    pub fn utilization(&self) -> f64 {
        self.tasks.iter().filter_map(|t| t.period.map(|p| t.wcet as f64 / p as f64)).sum()
    }

    pub fn with_delta(&self, delta: Duration) -> Self {
        TaskSet { delta, ..self.clone() }
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        TaskSet { name: name.into(), ..self.clone() }
    }

    /// Returns a copy with every wcet replaced by `f(task)`.
    pub fn map_wcets(&self, mut f: impl FnMut(&TaskSpec) -> Duration) -> Self {
        let tasks = self.tasks.iter().map(|t| TaskSpec { wcet: f(t), ..t.clone() }).collect();
        TaskSet { tasks, ..self.clone() }
    }

    /// Tasks sorted from highest to lowest priority.
    pub fn by_priority(&self) -> Vec<&TaskSpec> {
        let mut tasks: Vec<_> = self.tasks.iter().collect();
        tasks.sort_by_key(|t| (t.priority, t.id));
        tasks
    }

    /// Subscriptions activated by a publication of `task`.
    pub fn subscribers_of(&self, task: &TaskSpec) -> impl Iterator<Item = &TaskSpec> + '_ {
        let topic = task.publishes_to;
        self.tasks.iter().filter(move |t| topic.is_some() && t.subscribes_to == topic)
    }
}

/// Least common multiple of all timer periods.
pub fn hyperperiod(taskset: &TaskSet) -> Result<Duration, ModelError> {
    let mut acc: Option<u64> = None;
    for period in taskset.timers().map(TaskSpec::period) {
        acc = Some(match acc {
            None => period,
            Some(h) => {
                let g = crate::time::gcd(h, period);
                (h / g).checked_mul(period).ok_or(ModelError::HyperperiodOverflow)?
            }
        });
    }
    acc.ok_or(ModelError::EmptyHyperperiod)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityPolicy {
    Fifo,
    #[serde(rename = "fp")]
    FixedPriority,
    #[serde(rename = "rm")]
    RateMonotonic,
    Edf,
}

impl fmt::Display for PriorityPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorityPolicy::Fifo => "fifo",
            PriorityPolicy::FixedPriority => "fp",
            PriorityPolicy::RateMonotonic => "rm",
            PriorityPolicy::Edf => "edf",
        })
    }
}

impl FromStr for PriorityPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(PriorityPolicy::Fifo),
            "fp" | "fixed" | "fixed-priority" => Ok(PriorityPolicy::FixedPriority),
            "rm" | "rate-monotonic" => Ok(PriorityPolicy::RateMonotonic),
            "edf" => Ok(PriorityPolicy::Edf),
            other => Err(format!("unknown priority policy {other:?}")),
        }
    }
}

/// Returns a copy of the task set whose priorities are the ranks `0..n`
/// of the policy order. RM orders by (period, id); subscriptions without
/// a declared period sort last. FixedPriority renumbers the existing order.
pub fn assign_priorities(taskset: &TaskSet, policy: PriorityPolicy) -> Result<TaskSet, ModelError> {
    let mut order: Vec<usize> = (0..taskset.tasks.len()).collect();
    match policy {
        PriorityPolicy::RateMonotonic => {
            order.sort_by_key(|&i| {
                let t = &taskset.tasks[i];
                (t.period.unwrap_or(u64::MAX), t.id)
            });
        }
        PriorityPolicy::FixedPriority => {
            order.sort_by_key(|&i| (taskset.tasks[i].priority, taskset.tasks[i].id));
        }
        PriorityPolicy::Fifo | PriorityPolicy::Edf => return Err(ModelError::NoStaticAssignment(policy)),
    }
    let mut tasks = taskset.tasks.clone();
    for (rank, &i) in order.iter().enumerate() {
        tasks[i].priority = rank as u32;
    }
    Ok(TaskSet { tasks, ..taskset.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainMode {
    /// Timer head followed by subscriptions activated by publication.
    Sequence,
    /// Periodic tasks communicating through last-is-best registers.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub id: u32,
    pub task_ids: Vec<TaskId>,
    pub mode: ChainMode,
}

impl Chain {
    pub fn new(id: u32, mode: ChainMode, task_ids: Vec<TaskId>) -> Self {
        Chain { id, task_ids, mode }
    }

    pub fn validate(&self, taskset: &TaskSet) -> Result<(), ModelError> {
        let bad = |msg: String| ModelError::InvalidChain(self.id, msg);
        if self.task_ids.is_empty() {
            return Err(bad("chain is empty".into()));
        }
        let tasks = self
            .task_ids
            .iter()
            .map(|&id| taskset.task(id).ok_or(ModelError::UnknownTask(id)))
            .collect::<Result<Vec<_>, _>>()?;
        match self.mode {
            ChainMode::Sampled => {
                if let Some(t) = tasks.iter().find(|t| !t.is_timer()) {
                    return Err(bad(format!("sampled chain contains subscription {}", t.id)));
                }
            }
            ChainMode::Sequence => {
                if !tasks[0].is_timer() {
                    return Err(bad("sequence must start with a timer".into()));
                }
                for pair in tasks.windows(2) {
                    let (up, down) = (pair[0], pair[1]);
                    if down.is_timer() || up.publishes_to.is_none() || down.subscribes_to != up.publishes_to {
                        return Err(bad(format!("task {} is not activated by task {}", down.id, up.id)));
                    }
                    let activators = taskset.tasks().iter().filter(|t| t.publishes_to == down.subscribes_to).count();
                    if activators != 1 {
                        return Err(bad(format!("subscription {} has {activators} activators", down.id)));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Identifies the `index`-th job of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobRef {
    pub task_id: TaskId,
    pub index: u64,
}

/// One executed job instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub task_id: TaskId,
    pub index: u64,
    /// Timer timestamp at release, or the publication instant for subscriptions.
    pub nominal_ts: Instant,
    pub enqueue_t: Instant,
    pub start_t: Instant,
    pub finish_t: Instant,
    pub abs_deadline: Option<Instant>,
    pub skipped_before: u64,
    /// The job whose publication activated this one.
    #[serde(skip)]
    pub activated_by: Option<JobRef>,
}

impl Job {
    pub fn job_ref(&self) -> JobRef {
        JobRef { task_id: self.task_id, index: self.index }
    }

    pub fn response_time(&self) -> Duration {
        self.finish_t - self.nominal_ts
    }

    pub fn missed_deadline(&self) -> bool {
        self.abs_deadline.is_some_and(|d| self.finish_t > d)
    }
}
