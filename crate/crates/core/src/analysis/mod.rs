//! Response-time and latency bounds for timer-only task sets.
//!
//! [`analyze`] runs the full pipeline: inflate every wcet with the releaser
//! overhead, bound the response times under non-preemptive FP or EDF, then sum
//! `T + R` along each chain.

mod np_edf;
mod np_fp;
mod overhead;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{assign_priorities, Chain, ModelError, PriorityPolicy, TaskId, TaskSet};
use crate::time::{ns_to_ms, Duration};

pub use np_edf::{dbf, edf_schedulable};
pub use np_fp::wcrt_np_fp;
pub use overhead::{overhead_re, overhead_ro, overhead_tightened};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("task {0}: releaser overhead unbounded at this utilization")]
    OverheadUnbounded(TaskId),
    #[error("tightening requires prior schedulability proof")]
    TighteningUnproven,
    #[error("chain {chain}: task {task} unbounded")]
    ChainTaskUnbounded { chain: u32, task: TaskId },
    #[error("task {0} is a subscription; only timer task sets can be analyzed")]
    Subscription(TaskId),
    #[error("no schedulability analysis for policy {0}")]
    UnsupportedPolicy(PriorityPolicy),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which thread executes timer jobs after releasing them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseOption {
    Ro,
    Re,
}

impl fmt::Display for ReleaseOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReleaseOption::Ro => "ro",
            ReleaseOption::Re => "re",
        })
    }
}

impl FromStr for ReleaseOption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ro" | "release-only" => Ok(ReleaseOption::Ro),
            "re" | "release-execute" => Ok(ReleaseOption::Re),
            other => Err(format!("unknown release option `{other}` (expected ro or re)")),
        }
    }
}

/// `sum (T + R)` over the chain's tasks.
pub fn e2e_bound(
    chain: &Chain,
    taskset: &TaskSet,
    wcrts: &BTreeMap<TaskId, Duration>,
) -> Result<Duration, AnalysisError> {
    chain.task_ids.iter().try_fold(0, |acc: Duration, &id| {
        let unbounded = AnalysisError::ChainTaskUnbounded { chain: chain.id, task: id };
        let period = taskset.task(id).and_then(|t| t.period).ok_or(unbounded.clone())?;
        let r = wcrts.get(&id).ok_or(unbounded)?;
        Ok(acc + period + r)
    })
}

fn as_ms<S: Serializer>(ns: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(ns_to_ms(*ns))
}

fn opt_as_ms<S: Serializer>(ns: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
    match ns {
        Some(ns) => s.serialize_some(&ns_to_ms(*ns)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskBound {
    pub task_id: TaskId,
    #[serde(rename = "delta_ms", serialize_with = "as_ms")]
    pub overhead: Duration,
    #[serde(rename = "inflated_wcet_ms", serialize_with = "as_ms")]
    pub inflated_wcet: Duration,
    #[serde(rename = "wcrt_ms", serialize_with = "opt_as_ms")]
    pub wcrt: Option<Duration>,
    #[serde(rename = "deadline_ms", serialize_with = "as_ms")]
    pub deadline: Duration,
    pub meets_deadline: bool,
    /// Response bound recomputed with `n * delta` once the set is proven schedulable.
    #[serde(rename = "tightened_wcrt_ms", serialize_with = "opt_as_ms")]
    pub tightened_wcrt: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainBound {
    pub chain_id: u32,
    #[serde(rename = "latency_bound_ms", serialize_with = "opt_as_ms")]
    pub latency_bound: Option<Duration>,
    #[serde(rename = "tightened_latency_bound_ms", serialize_with = "opt_as_ms")]
    pub tightened_latency_bound: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub policy: PriorityPolicy,
    pub option: ReleaseOption,
    #[serde(rename = "delta_ms", serialize_with = "as_ms")]
    pub delta: Duration,
    pub schedulable: bool,
    pub tasks: Vec<TaskBound>,
    pub chains: Vec<ChainBound>,
}

impl AnalysisReport {
    pub fn task(&self, id: TaskId) -> Option<&TaskBound> {
        self.tasks.iter().find(|t| t.task_id == id)
    }

    pub fn chain(&self, id: u32) -> Option<&ChainBound> {
        self.chains.iter().find(|c| c.chain_id == id)
    }

    /// Response bounds of the tasks that have one.
    pub fn wcrts(&self) -> BTreeMap<TaskId, Duration> {
        self.tasks.iter().filter_map(|t| Some((t.task_id, t.wcrt?))).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialize");
        s.push('\n');
        s
    }

    /// `task_id,delta_ms,inflated_wcet_ms,wcrt_ms,deadline_ms,meets_deadline`
    pub fn tasks_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["task_id", "delta_ms", "inflated_wcet_ms", "wcrt_ms", "deadline_ms", "meets_deadline"])
            .expect("in-memory write");
        for t in &self.tasks {
            w.write_record([
                t.task_id.to_string(),
                fmt_ms(t.overhead),
                fmt_ms(t.inflated_wcet),
                t.wcrt.map(fmt_ms).unwrap_or_default(),
                fmt_ms(t.deadline),
                t.meets_deadline.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// `chain_id,latency_bound_ms`
    pub fn chains_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["chain_id", "latency_bound_ms"]).expect("in-memory write");
        for c in &self.chains {
            w.write_record([c.chain_id.to_string(), c.latency_bound.map(fmt_ms).unwrap_or_default()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn fmt_ms(ns: Duration) -> String {
    ns_to_ms(ns).to_string()
}

fn response_bounds(inflated: &TaskSet, policy: PriorityPolicy) -> Vec<Option<Duration>> {
    match policy {
        PriorityPolicy::Edf => {
            let ok = edf_schedulable(inflated);
            inflated.tasks().iter().map(|t| if ok { t.deadline } else { None }).collect()
        }
        _ => inflated.tasks().iter().map(|t| wcrt_np_fp(inflated, t.id)).collect(),
    }
}

fn chain_bound(chain: &Chain, taskset: &TaskSet, wcrts: &BTreeMap<TaskId, Duration>) -> Option<Duration> {
    match e2e_bound(chain, taskset, wcrts) {
        Ok(b) => Some(b),
        Err(e) => {
            log::debug!("{e}");
            None
        }
    }
}

/// Overhead inflation, response bounds, and chain latency bounds.
///
/// RM reassigns priorities by period; FP keeps the set's own priorities.
/// Under RO with a schedulable set the bounds are recomputed with the
/// tightened overhead and reported alongside the untightened ones.
pub fn analyze(
    taskset: &TaskSet,
    policy: PriorityPolicy,
    option: ReleaseOption,
    delta: Duration,
    chains: &[Chain],
) -> Result<AnalysisReport, AnalysisError> {
    if let Some(t) = taskset.tasks().iter().find(|t| !t.is_timer()) {
        return Err(AnalysisError::Subscription(t.id));
    }
    let set = match policy {
        PriorityPolicy::Fifo => return Err(AnalysisError::UnsupportedPolicy(policy)),
        PriorityPolicy::RateMonotonic => assign_priorities(taskset, policy)?,
        PriorityPolicy::FixedPriority | PriorityPolicy::Edf => taskset.clone(),
    };
    let n = set.len();
    let overheads: BTreeMap<TaskId, Duration> = set
        .tasks()
        .iter()
        .map(|t| {
            let o = match option {
                ReleaseOption::Re => overhead_re(n, delta),
                ReleaseOption::Ro => overhead_ro(&set, t.id, delta)?,
            };
            Ok((t.id, o))
        })
        .collect::<Result<_, AnalysisError>>()?;
    let inflated = set.map_wcets(|t| t.wcet + overheads[&t.id]);
    let wcrts = response_bounds(&inflated, policy);
    let schedulable = wcrts.iter().all(Option::is_some);

    let tightened = if schedulable && option == ReleaseOption::Ro {
        let d = overhead_tightened(n, delta, true)?;
        let retight = set.map_wcets(|t| t.wcet + d);
        response_bounds(&retight, policy)
    } else {
        wcrts.clone()
    };

    let tasks: Vec<TaskBound> = inflated
        .tasks()
        .iter()
        .zip(wcrts.iter().zip(&tightened))
        .map(|(t, (&wcrt, &tight))| {
            let deadline = t.deadline.expect("validated timer has a deadline");
            TaskBound {
                task_id: t.id,
                overhead: overheads[&t.id],
                inflated_wcet: t.wcet,
                wcrt,
                deadline,
                meets_deadline: wcrt.is_some_and(|r| r <= deadline),
                tightened_wcrt: tight,
            }
        })
        .collect();
    let bound_map: BTreeMap<TaskId, Duration> = tasks.iter().filter_map(|t| Some((t.task_id, t.wcrt?))).collect();
    let tight_map: BTreeMap<TaskId, Duration> =
        tasks.iter().filter_map(|t| Some((t.task_id, t.tightened_wcrt?))).collect();
    let chains = chains
        .iter()
        .map(|c| ChainBound {
            chain_id: c.id,
            latency_bound: chain_bound(c, &set, &bound_map),
            tightened_latency_bound: chain_bound(c, &set, &tight_map),
        })
        .collect();
    Ok(AnalysisReport { policy, option, delta, schedulable, tasks, chains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChainMode, TaskSpec};
    use crate::time::NS_PER_MS as MS;

    fn pair() -> TaskSet {
        TaskSet::new("a", vec![TaskSpec::timer(1, MS, 4 * MS), TaskSpec::timer(2, 2 * MS, 6 * MS)], 0).unwrap()
    }

    #[test]
    fn e2e_sums_period_and_response() {
        let ts = pair();
        let wcrts = BTreeMap::from([(1, 3 * MS), (2, 3 * MS)]);
        let chain = Chain::new(0, ChainMode::Sampled, vec![1, 2]);
        assert_eq!(e2e_bound(&chain, &ts, &wcrts).unwrap(), 16 * MS);
        let single = Chain::new(1, ChainMode::Sampled, vec![2]);
        assert_eq!(e2e_bound(&single, &ts, &wcrts).unwrap(), 9 * MS);
        let missing = BTreeMap::from([(1, 3 * MS)]);
        assert_eq!(e2e_bound(&chain, &ts, &missing), Err(AnalysisError::ChainTaskUnbounded { chain: 0, task: 2 }));
    }

    #[test]
    fn zero_delta_keeps_wcets() {
        let ts = pair();
        for option in [ReleaseOption::Ro, ReleaseOption::Re] {
            let r = analyze(&ts, PriorityPolicy::RateMonotonic, option, 0, &[]).unwrap();
            assert!(r.schedulable);
            assert_eq!(r.task(1).unwrap().inflated_wcet, MS);
            assert_eq!(r.task(2).unwrap().inflated_wcet, 2 * MS);
            assert_eq!(r.task(1).unwrap().wcrt, Some(3 * MS));
        }
    }

    #[test]
    fn edf_claims_deadlines() {
        let ts = pair();
        let r = analyze(&ts, PriorityPolicy::Edf, ReleaseOption::Re, 0, &[]).unwrap();
        assert!(r.schedulable);
        assert_eq!(r.task(2).unwrap().wcrt, Some(6 * MS));
    }

    #[test]
    fn rejects_subscriptions_and_fifo() {
        let subs = TaskSet::new("s", vec![TaskSpec::timer(0, 1, 10).publishing(0), TaskSpec::subscription(1, 1, 0)], 0)
            .unwrap();
        assert_eq!(
            analyze(&subs, PriorityPolicy::RateMonotonic, ReleaseOption::Ro, 0, &[]),
            Err(AnalysisError::Subscription(1))
        );
        assert_eq!(
            analyze(&pair(), PriorityPolicy::Fifo, ReleaseOption::Ro, 0, &[]),
            Err(AnalysisError::UnsupportedPolicy(PriorityPolicy::Fifo))
        );
    }

    #[test]
    fn window_crossing_a_period_is_not_tightened() {
        // 9.5 + (ceil(t/10) + ceil(t/100)) * 0.5 settles at 11: three releases
        let ts = TaskSet::new("t", vec![TaskSpec::timer(0, MS, 10 * MS), TaskSpec::timer(1, 19 * MS / 2, 100 * MS)], 0)
            .unwrap();
        let r = analyze(&ts, PriorityPolicy::RateMonotonic, ReleaseOption::Ro, MS / 2, &[]).unwrap();
        assert_eq!(r.task(1).unwrap().overhead, 3 * MS / 2);
        // the long job blocks the short one past its deadline, so no tightening
        assert!(!r.schedulable);
        assert_eq!(r.task(0).unwrap().tightened_wcrt, None);
    }

    #[test]
    fn schedulable_ro_overhead_is_n_delta() {
        let ts =
            TaskSet::new("t", vec![TaskSpec::timer(0, MS, 10 * MS), TaskSpec::timer(1, 7 * MS, 100 * MS)], 0).unwrap();
        let r = analyze(&ts, PriorityPolicy::RateMonotonic, ReleaseOption::Ro, MS / 2, &[]).unwrap();
        assert!(r.schedulable);
        for t in &r.tasks {
            assert_eq!(t.overhead, MS);
            assert_eq!(t.tightened_wcrt, t.wcrt);
        }
    }

    #[test]
    fn csv_headers() {
        let r = analyze(&pair(), PriorityPolicy::RateMonotonic, ReleaseOption::Ro, 0, &[]).unwrap();
        assert!(r
            .tasks_csv()
            .starts_with("task_id,delta_ms,inflated_wcet_ms,wcrt_ms,deadline_ms,meets_deadline\n1,0,1,3,4,true\n"));
        assert_eq!(r.chains_csv(), "chain_id,latency_bound_ms\n");
    }
}
