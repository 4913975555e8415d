use std::collections::BTreeMap;

use super::priority::{JobKey, KeyTable};
use super::{ScheduleTrace, SimError};
use crate::model::{Job, JobRef, PriorityPolicy, TaskSet};
use crate::time::{Duration, Instant};

/// Ideal work-conserving non-preemptive scheduler.
///
/// Timers release exactly at `phase + k * period` for every timestamp before
/// the horizon, releases cost nothing, and a decision is taken whenever the
/// processor becomes free or a job arrives at an idle processor. Published
/// messages activate subscribers immediately and are never lost.
pub fn reference_np_schedule(
    taskset: &TaskSet,
    policy: PriorityPolicy,
    horizon: Duration,
) -> Result<ScheduleTrace, SimError> {
    if horizon == 0 {
        return Err(SimError::InvalidHorizon);
    }
    if policy == PriorityPolicy::Fifo {
        return Err(SimError::NoPriority(policy));
    }
    let keys = KeyTable::new(taskset, policy)?;
    let tasks = taskset.tasks();

    // (release, priority, id) ordered list of every periodic release
    let mut releases: Vec<(Instant, u32, usize)> = Vec::new();
    for (i, t) in tasks.iter().enumerate().filter(|(_, t)| t.is_timer()) {
        let mut r = t.phase;
        while r < horizon {
            releases.push((r, t.priority, i));
            r += t.period();
        }
    }
    releases.sort_unstable();

    struct Ready {
        task: usize,
        index: u64,
        release: Instant,
        activated_by: Option<JobRef>,
    }

    let mut counts = vec![0u64; tasks.len()];
    let mut ready: BTreeMap<(JobKey, u64), Ready> = BTreeMap::new();
    let mut seq = 0u64;
    let mut enqueue =
        |ready: &mut BTreeMap<(JobKey, u64), Ready>, task: usize, release: Instant, by: Option<JobRef>| {
            let deadline = tasks[task].deadline.map(|d| release + d);
            let job = Ready { task, index: counts[task], release, activated_by: by };
            counts[task] += 1;
            ready.insert((keys.key(task, deadline), seq), job);
            seq += 1;
        };

    let mut jobs = Vec::new();
    let mut next = 0;
    let mut now: Instant = 0;
    loop {
        while next < releases.len() && releases[next].0 <= now {
            enqueue(&mut ready, releases[next].2, releases[next].0, None);
            next += 1;
        }
        let Some((_, job)) = ready.pop_first() else {
            if next == releases.len() {
                break;
            }
            now = releases[next].0;
            continue;
        };
        let spec = &tasks[job.task];
        let finish = now + spec.wcet;
        let done = Job {
            task_id: spec.id,
            index: job.index,
            nominal_ts: job.release,
            enqueue_t: job.release,
            start_t: now,
            finish_t: finish,
            abs_deadline: spec.deadline.map(|d| job.release + d),
            skipped_before: 0,
            activated_by: job.activated_by,
        };
        let source = done.job_ref();
        jobs.push(done);
        now = finish;
        if spec.publishes_to.is_some() {
            for (j, sub) in tasks.iter().enumerate() {
                if sub.subscribes_to == spec.publishes_to {
                    enqueue(&mut ready, j, finish, Some(source));
                }
            }
        }
    }
    Ok(ScheduleTrace { jobs, drops: Vec::new(), horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskSpec;
    use crate::time::NS_PER_MS as MS;

    #[test]
    fn hand_simulated_rm_hyperperiod() {
        let ts =
            TaskSet::new("r", vec![TaskSpec::timer(1, MS, 4 * MS), TaskSpec::timer(2, 2 * MS, 6 * MS)], 0).unwrap();
        let t = reference_np_schedule(&ts, PriorityPolicy::RateMonotonic, 12 * MS).unwrap();
        let seq: Vec<_> = t.execution_sequence().into_iter().map(|(id, s, f)| (id, s / MS, f / MS)).collect();
        assert_eq!(seq, vec![(1, 0, 1), (2, 1, 3), (1, 4, 5), (2, 6, 8), (1, 8, 9)]);
    }

    #[test]
    fn single_task_runs_at_each_release() {
        let ts = TaskSet::new("r", vec![TaskSpec::timer(0, MS, 10 * MS)], 0).unwrap();
        let t = reference_np_schedule(&ts, PriorityPolicy::FixedPriority, 30 * MS).unwrap();
        let seq: Vec<_> = t.execution_sequence().into_iter().map(|(_, s, f)| (s / MS, f / MS)).collect();
        assert_eq!(seq, vec![(0, 1), (10, 11), (20, 21)]);
    }

    #[test]
    fn lower_priority_job_blocks_once_started() {
        // task 2 starts at 0 alone; task 1 arrives at 1 and waits for it
        let ts = TaskSet::new(
            "r",
            vec![TaskSpec::timer(1, MS, 5 * MS).with_phase(MS), TaskSpec::timer(2, 3 * MS, 10 * MS)],
            0,
        )
        .unwrap();
        let t = reference_np_schedule(&ts, PriorityPolicy::RateMonotonic, 5 * MS).unwrap();
        assert_eq!(t.execution_sequence(), vec![(2, 0, 3 * MS), (1, 3 * MS, 4 * MS)]);
    }

    #[test]
    fn edf_runs_earliest_absolute_deadline() {
        let ts = TaskSet::new(
            "r",
            vec![TaskSpec::timer(1, MS, 10 * MS), TaskSpec::timer(2, MS, 8 * MS).with_priority(9)],
            0,
        )
        .unwrap();
        let t = reference_np_schedule(&ts, PriorityPolicy::Edf, 8 * MS).unwrap();
        assert_eq!(t.jobs[0].task_id, 2);
    }

    #[test]
    fn fifo_is_rejected() {
        let ts = TaskSet::new("r", vec![TaskSpec::timer(0, MS, 10 * MS)], 0).unwrap();
        assert!(reference_np_schedule(&ts, PriorityPolicy::Fifo, 10 * MS).is_err());
    }
}
