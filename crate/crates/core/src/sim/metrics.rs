use serde::{Serialize, Serializer};

use super::{measure_sampled_latency, measure_sequence_latency, ScheduleTrace, SimError};
use crate::model::{Chain, ChainMode, ModelError, TaskId, TaskSet};
use crate::time::{ns_to_ms, Duration};

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
pub struct TaskMetrics {
    pub task_id: TaskId,
    pub released: u64,
    pub dropped: u64,
    #[serde(rename = "max_response_ms", serialize_with = "as_ms")]
    pub max_response: Duration,
    pub mean_response_ms: f64,
    pub deadline_misses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainMetrics {
    pub chain_id: u32,
    /// `None` when no cause propagated through the whole chain.
    #[serde(rename = "max_latency_ms", serialize_with = "opt_as_ms")]
    pub max_latency: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    pub tasks: Vec<TaskMetrics>,
    pub chains: Vec<ChainMetrics>,
}

impl SimMetrics {
    pub fn task(&self, id: TaskId) -> Option<&TaskMetrics> {
        self.tasks.iter().find(|t| t.task_id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}

/// Per-task response statistics and per-chain maximum latency.
pub fn compute_metrics(trace: &ScheduleTrace, taskset: &TaskSet, chains: &[Chain]) -> Result<SimMetrics, SimError> {
    for chain in chains {
        if let Some(&id) = chain.task_ids.iter().find(|&&id| taskset.task(id).is_none()) {
            return Err(ModelError::UnknownTask(id).into());
        }
    }
    let tasks = taskset
        .tasks()
        .iter()
        .map(|spec| {
            let mut released = 0u64;
            let mut max_response = 0;
            let mut total: u128 = 0;
            let mut misses = 0;
            for job in trace.jobs_of(spec.id) {
                released += 1;
                let r = job.response_time();
                max_response = max_response.max(r);
                total += u128::from(r);
                misses += u64::from(job.missed_deadline());
            }
            TaskMetrics {
                task_id: spec.id,
                released,
                dropped: trace.dropped(spec.id),
                max_response,
                mean_response_ms: if released == 0 { 0.0 } else { total as f64 / released as f64 / 1e6 },
                deadline_misses: misses,
            }
        })
        .collect();
    let chains = chains
        .iter()
        .map(|chain| {
            let measured = match chain.mode {
                ChainMode::Sequence => measure_sequence_latency(trace, chain),
                ChainMode::Sampled => measure_sampled_latency(trace, chain),
            };
            let max_latency = match measured {
                Ok(l) => Some(l),
                Err(SimError::NoCompletePropagation(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ChainMetrics { chain_id: chain.id, max_latency })
        })
        .collect::<Result<_, SimError>>()?;
    Ok(SimMetrics { tasks, chains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Job, TaskSpec};
    use crate::sim::DropRecord;

    fn job(task_id: TaskId, nominal: u64, finish: u64, deadline: u64) -> Job {
        Job {
            task_id,
            index: 0,
            nominal_ts: nominal,
            enqueue_t: nominal,
            start_t: nominal,
            finish_t: finish,
            abs_deadline: Some(deadline),
            skipped_before: 0,
            activated_by: None,
        }
    }

    #[test]
    fn response_and_drop_passthrough() {
        let ts = TaskSet::new("m", vec![TaskSpec::timer(0, 1, 30)], 0).unwrap();
        let trace = ScheduleTrace {
            jobs: vec![job(0, 0, 12, 30), job(0, 90, 121, 120)],
            drops: vec![DropRecord { task_id: 0, skipped_at: 60, count: 2 }],
            horizon: 120,
        };
        let m = compute_metrics(&trace, &ts, &[]).unwrap();
        let t = m.task(0).unwrap();
        assert_eq!(t.released, 2);
        assert_eq!(t.dropped, 2);
        assert_eq!(t.max_response, 31);
        assert_eq!(t.deadline_misses, 1);
        assert_eq!(
            compute_metrics(&ScheduleTrace { jobs: vec![job(0, 0, 12, 30)], drops: vec![], horizon: 30 }, &ts, &[])
                .unwrap()
                .task(0)
                .unwrap()
                .max_response,
            12
        );
    }

    #[test]
    fn unknown_chain_task_is_an_error() {
        let ts = TaskSet::new("m", vec![TaskSpec::timer(0, 1, 30)], 0).unwrap();
        let trace = ScheduleTrace { jobs: vec![], drops: vec![], horizon: 30 };
        let chain = Chain::new(0, ChainMode::Sampled, vec![0, 7]);
        assert!(matches!(compute_metrics(&trace, &ts, &[chain]), Err(SimError::Model(ModelError::UnknownTask(7)))));
    }
}
