//! JSON task-set file format.
//!
//! ```json
//! {
//!   "name": "cs60",
//!   "delta_ms": 0.12,
//!   "tasks": [{"id": 0, "kind": "timer", "wcet_ms": 1, "period_ms": 30, "priority": 0}],
//!   "chains": [{"id": 0, "mode": "sampled", "task_ids": [0]}]
//! }
//! ```
//!
//! `deadline_ms` defaults to `period_ms` and `phase_ms` to 0. Priorities
//! may be omitted for every task, in which case rate-monotonic ranks are
//! assigned.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    assign_priorities, Chain, ChainMode, ModelError, PriorityPolicy, TaskId, TaskKind, TaskSet, TaskSpec, TopicId,
};
use crate::time::{ms_to_ns, ns_to_ms, TimeError};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed task-set file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("task {0}: {1}")]
    Time(TaskId, TimeError),
    #[error("priorities must be given for all tasks or for none")]
    PartialPriorities,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskSetDoc {
    name: String,
    #[serde(default)]
    delta_ms: f64,
    tasks: Vec<TaskDoc>,
    #[serde(default)]
    chains: Vec<ChainDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskDoc {
    id: TaskId,
    kind: TaskKind,
    wcet_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deadline_ms: Option<f64>,
    #[serde(default)]
    phase_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subscribes_to: Option<TopicId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    publishes_to: Option<TopicId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainDoc {
    id: u32,
    mode: ChainMode,
    task_ids: Vec<TaskId>,
}

/// A task set together with the chains defined over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub taskset: TaskSet,
    pub chains: Vec<Chain>,
}

impl Workload {
    pub fn new(taskset: TaskSet, chains: Vec<Chain>) -> Result<Self, ModelError> {
        for chain in &chains {
            chain.validate(&taskset)?;
        }
        Ok(Workload { taskset, chains })
    }

    pub fn from_json(text: &str) -> Result<Self, FileError> {
        let doc: TaskSetDoc = serde_json::from_str(text)?;
        let with_priority = doc.tasks.iter().filter(|t| t.priority.is_some()).count();
        if with_priority != 0 && with_priority != doc.tasks.len() {
            return Err(FileError::PartialPriorities);
        }
        let conv = |id, ms| ms_to_ns(ms).map_err(|e| FileError::Time(id, e));
        let mut tasks = Vec::with_capacity(doc.tasks.len());
        for (rank, t) in doc.tasks.iter().enumerate() {
            let period = t.period_ms.map(|p| conv(t.id, p)).transpose()?;
            let deadline = match t.deadline_ms {
                Some(d) => Some(conv(t.id, d)?),
                None => period,
            };
            tasks.push(TaskSpec {
                id: t.id,
                kind: t.kind,
                wcet: conv(t.id, t.wcet_ms)?,
                period,
                deadline,
                phase: conv(t.id, t.phase_ms)?,
                priority: t.priority.unwrap_or(rank as u32),
                subscribes_to: t.subscribes_to,
                publishes_to: t.publishes_to,
            });
        }
        let delta = ms_to_ns(doc.delta_ms).map_err(|e| FileError::Time(0, e))?;
        let mut taskset = TaskSet::new(doc.name, tasks, delta)?;
        if with_priority == 0 && !taskset.is_empty() {
            taskset = assign_priorities(&taskset, PriorityPolicy::RateMonotonic)?;
        }
        let chains = doc.chains.into_iter().map(|c| Chain::new(c.id, c.mode, c.task_ids)).collect();
        Ok(Workload::new(taskset, chains)?)
    }

    pub fn to_json(&self) -> String {
        let doc = TaskSetDoc {
            name: self.taskset.name().to_string(),
            delta_ms: ns_to_ms(self.taskset.delta()),
            tasks: self
                .taskset
                .tasks()
                .iter()
                .map(|t| TaskDoc {
                    id: t.id,
                    kind: t.kind,
                    wcet_ms: ns_to_ms(t.wcet),
                    period_ms: t.period.map(ns_to_ms),
                    deadline_ms: t.deadline.map(ns_to_ms),
                    phase_ms: ns_to_ms(t.phase),
                    priority: Some(t.priority),
                    subscribes_to: t.subscribes_to,
                    publishes_to: t.publishes_to,
                })
                .collect(),
            chains: self
                .chains
                .iter()
                .map(|c| ChainDoc { id: c.id, mode: c.mode, task_ids: c.task_ids.clone() })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("task-set document serializes");
        text.push('\n');
        text
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| FileError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FileError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|source| FileError::Io { path: path.display().to_string(), source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_deadline_and_phase() {
        let w = Workload::from_json(
            r#"{"name":"x","delta_ms":0.12,"tasks":[
                {"id":1,"kind":"timer","wcet_ms":10,"period_ms":84},
                {"id":2,"kind":"timer","wcet_ms":1,"period_ms":30,"deadline_ms":20,"phase_ms":2.5}
            ]}"#,
        )
        .unwrap();
        let cam = w.taskset.task(1).unwrap();
        assert_eq!(cam.deadline, Some(84_000_000));
        assert_eq!(cam.phase, 0);
        let imu = w.taskset.task(2).unwrap();
        assert_eq!(imu.deadline, Some(20_000_000));
        assert_eq!(imu.phase, 2_500_000);
        // priorities were omitted, so RM ranks are assigned
        assert_eq!(imu.priority, 0);
        assert_eq!(cam.priority, 1);
        assert_eq!(w.taskset.delta(), 120_000);
    }

    #[test]
    fn round_trips_through_json() {
        let w = Workload::from_json(
            r#"{"name":"seq","delta_ms":0,"tasks":[
                {"id":0,"kind":"timer","wcet_ms":1.234567,"period_ms":10,"priority":0,"publishes_to":7},
                {"id":1,"kind":"subscription","wcet_ms":2,"priority":1,"subscribes_to":7}
            ],"chains":[{"id":3,"mode":"sequence","task_ids":[0,1]}]}"#,
        )
        .unwrap();
        let again = Workload::from_json(&w.to_json()).unwrap();
        assert_eq!(w, again);
        assert_eq!(again.taskset.task(0).unwrap().wcet, 1_234_567);
    }

    #[test]
    fn rejects_partial_priorities_and_bad_chains() {
        let partial = Workload::from_json(
            r#"{"name":"x","tasks":[
                {"id":0,"kind":"timer","wcet_ms":1,"period_ms":10,"priority":0},
                {"id":1,"kind":"timer","wcet_ms":1,"period_ms":10}
            ]}"#,
        );
        assert!(matches!(partial, Err(FileError::PartialPriorities)));
        let chain = Workload::from_json(
            r#"{"name":"x","tasks":[{"id":0,"kind":"timer","wcet_ms":1,"period_ms":10}],
                "chains":[{"id":0,"mode":"sampled","task_ids":[4]}]}"#,
        );
        assert!(matches!(chain, Err(FileError::Model(ModelError::UnknownTask(4)))));
    }
}
