//! End-to-end latency measured on a simulated trace.

use std::collections::HashMap;

use super::{ScheduleTrace, SimError};
use crate::model::{Chain, ChainMode, Job, JobRef, TaskId};
use crate::time::Duration;

/// Event-driven propagation along a timer-headed sequence.
///
/// For every head job, follows the activation links down the chain and
/// takes the last job's finish minus the head job's timestamp. Head jobs
/// whose data was dropped or is still in flight are skipped.
pub fn measure_sequence_latency(trace: &ScheduleTrace, chain: &Chain) -> Result<Duration, SimError> {
    if chain.mode != ChainMode::Sequence {
        return Err(SimError::WrongChainMode(chain.id, "sequence"));
    }
    let mut children: HashMap<(JobRef, TaskId), &Job> = HashMap::new();
    for job in &trace.jobs {
        if let Some(parent) = job.activated_by {
            children.insert((parent, job.task_id), job);
        }
    }
    let head = chain.task_ids[0];
    let mut worst: Option<Duration> = None;
    'heads: for h in trace.jobs_of(head) {
        let mut current = h;
        for &next in &chain.task_ids[1..] {
            match children.get(&(current.job_ref(), next)) {
                Some(job) => current = job,
                None => continue 'heads,
            }
        }
        let latency = current.finish_t - h.nominal_ts;
        worst = Some(worst.map_or(latency, |w| w.max(latency)));
    }
    worst.ok_or(SimError::NoCompletePropagation(chain.id))
}

/// Maximum reaction time over last-is-best registers.
///
/// Each job reads its input register at start and writes its output at
/// finish. An external event arriving right after a head job's read is
/// first picked up by the next head job; each later stage reflects it with
/// its first job starting at or after the upstream writer's finish.
pub fn measure_sampled_latency(trace: &ScheduleTrace, chain: &Chain) -> Result<Duration, SimError> {
    if chain.mode != ChainMode::Sampled {
        return Err(SimError::WrongChainMode(chain.id, "sampled"));
    }
    let stages: Vec<Vec<&Job>> = chain.task_ids.iter().map(|&id| trace.jobs_of(id).collect()).collect();
    let mut worst: Option<Duration> = None;
    for pair in stages[0].windows(2) {
        let arrival = pair[0].start_t;
        let mut written = pair[1].finish_t;
        let mut complete = true;
        for stage in &stages[1..] {
            let first = stage.partition_point(|j| j.start_t < written);
            match stage.get(first) {
                Some(job) => written = job.finish_t,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            let latency = written - arrival;
            worst = Some(worst.map_or(latency, |w| w.max(latency)));
        }
    }
    worst.ok_or(SimError::NoCompletePropagation(chain.id))
}
