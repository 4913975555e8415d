//! Events executor: a timer management thread plus the default thread.
//!
//! Release-only (RO): the timer thread moves due timers into the events
//! queue, preempting the default thread for `delta` per release when it is
//! elevated. The default thread runs queue jobs non-preemptively.
//!
//! Release-and-execute (RE): the timer thread releases and runs timers
//! itself, either in timestamp order (FIFO) or through a priority-ordered
//! timer ready queue. Subscriptions run on the default thread in FIFO
//! order whenever the timer thread has nothing eligible.

use std::collections::{BTreeMap, HashSet, VecDeque};

use super::priority::{JobKey, KeyTable};
use super::{ExecutorConfig, ExecutorVariant, Pending, Runtime, ScheduleTrace, SimError};
use crate::time::{Duration, Instant};

type ReadyQueue = BTreeMap<(JobKey, u64), Pending>;

fn push_ready(ready: &mut ReadyQueue, keys: &KeyTable, p: Pending) {
    ready.insert((keys.key(p.task, p.abs_deadline), p.seq), p);
}

/// Work currently owned by the default thread.
enum Activity {
    Exec { job: Pending, start: Instant, remaining: Duration },
    SubRelease { job: Pending, remaining: Duration },
}

impl Activity {
    fn remaining(&self) -> Duration {
        match self {
            Activity::Exec { remaining, .. } | Activity::SubRelease { remaining, .. } => *remaining,
        }
    }

    fn consume(&mut self, elapsed: Duration) {
        match self {
            Activity::Exec { remaining, .. } | Activity::SubRelease { remaining, .. } => *remaining -= elapsed,
        }
    }
}

pub(super) fn run_release_only(mut rt: Runtime<'_>, config: &ExecutorConfig) -> Result<ScheduleTrace, SimError> {
    let keys = KeyTable::new(rt.taskset, config.policy)?;
    let delta = config.delta;
    let elevated = config.timer_thread_elevated;
    let mut ready = ReadyQueue::new();
    let mut activated: VecDeque<Pending> = VecDeque::new();
    let mut cancelled: HashSet<u64> = HashSet::new();
    let mut activity: Option<Activity> = None;
    let mut now: Instant = 0;

    loop {
        // timer management thread: an elevated one preempts the default thread
        if elevated || activity.is_none() {
            if let Some(k) = rt.eligible_timer(now) {
                // an elevated releaser handles each timestamp as of its nominal
                // instant, so a release backlog delays jobs but never skips one
                let released_at = if elevated { rt.timers[k].ts } else { now };
                now += delta;
                let job = rt.release_timer(k, released_at, now);
                push_ready(&mut ready, &keys, job);
                continue;
            }
        }

        if let Some(mut act) = activity.take() {
            let end = now + act.remaining();
            let interrupt = if elevated { rt.next_timer_ts().filter(|&ts| ts < end) } else { None };
            if let Some(ts) = interrupt {
                act.consume(ts - now);
                now = ts;
                activity = Some(act);
                continue;
            }
            now = end;
            match act {
                Activity::Exec { job, start, .. } => {
                    let task = job.task;
                    let source = rt.record(job, start, now);
                    let (new, evicted) = rt.publish(task, source, now);
                    cancelled.extend(evicted);
                    activated.extend(new);
                }
                Activity::SubRelease { mut job, .. } => {
                    if !cancelled.remove(&job.seq) {
                        job.enqueue = now;
                        push_ready(&mut ready, &keys, job);
                    }
                }
            }
            continue;
        }

        // default thread scheduling decision: release activated subscriptions first
        if let Some(mut job) = activated.pop_front() {
            if cancelled.remove(&job.seq) {
                continue;
            }
            if delta == 0 {
                push_ready(&mut ready, &keys, job);
            } else {
                job.enqueue = now;
                activity = Some(Activity::SubRelease { job, remaining: delta });
            }
            continue;
        }
        if let Some((_, job)) = ready.pop_first() {
            if cancelled.remove(&job.seq) {
                continue;
            }
            rt.take_from_inbox(job.task, job.seq);
            let remaining = rt.exec_time(job.task);
            activity = Some(Activity::Exec { job, start: now, remaining });
            continue;
        }
        match rt.next_timer_ts() {
            Some(ts) => now = now.max(ts),
            None => break,
        }
    }
    Ok(rt.finish())
}

/// Runs a job to completion from `now`, returning its finish instant.
fn execute(
    rt: &mut Runtime<'_>,
    job: Pending,
    now: Instant,
    activated: &mut VecDeque<Pending>,
    cancelled: &mut HashSet<u64>,
) -> Instant {
    let task = job.task;
    let finish = now + rt.exec_time(task);
    let source = rt.record(job, now, finish);
    let (new, evicted) = rt.publish(task, source, finish);
    cancelled.extend(evicted);
    activated.extend(new);
    finish
}

pub(super) fn run_release_execute(mut rt: Runtime<'_>, config: &ExecutorConfig) -> Result<ScheduleTrace, SimError> {
    let keys = KeyTable::new(rt.taskset, config.policy)?;
    let prioritized = config.variant == ExecutorVariant::PriorityRE;
    let delta = config.delta;
    let mut ready = ReadyQueue::new();
    let mut activated: VecDeque<Pending> = VecDeque::new();
    let mut sub_queue: VecDeque<Pending> = VecDeque::new();
    let mut cancelled: HashSet<u64> = HashSet::new();
    let mut now: Instant = 0;

    loop {
        // timer management thread
        if prioritized {
            // every reached timestamp becomes a release before the decision
            while let Some(k) = rt.eligible_timer(now) {
                let released_at = now;
                now += delta;
                let job = rt.release_timer(k, released_at, now);
                push_ready(&mut ready, &keys, job);
            }
            if let Some((_, job)) = ready.pop_first() {
                now = execute(&mut rt, job, now, &mut activated, &mut cancelled);
                continue;
            }
        } else if let Some(k) = rt.eligible_timer(now) {
            let released_at = now;
            now += delta;
            let job = rt.release_timer(k, released_at, now);
            now = execute(&mut rt, job, now, &mut activated, &mut cancelled);
            continue;
        }

        // default thread, only while the timer thread waits
        if !activated.is_empty() {
            while let Some(mut job) = activated.pop_front() {
                if cancelled.remove(&job.seq) {
                    continue;
                }
                now += delta;
                job.enqueue = now;
                sub_queue.push_back(job);
            }
            continue;
        }
        if let Some(job) = sub_queue.pop_front() {
            if cancelled.remove(&job.seq) {
                continue;
            }
            rt.take_from_inbox(job.task, job.seq);
            now = execute(&mut rt, job, now, &mut activated, &mut cancelled);
            continue;
        }
        match rt.next_timer_ts() {
            Some(ts) => now = now.max(ts),
            None => break,
        }
    }
    Ok(rt.finish())
}

#[cfg(test)]
mod tests {
    use crate::model::{PriorityPolicy, TaskSet, TaskSpec};
    use crate::sim::{simulate, ExecutorConfig, ExecutorVariant, ScheduleTrace};
    use crate::time::NS_PER_MS as MS;

    fn run(
        tasks: Vec<TaskSpec>,
        variant: ExecutorVariant,
        policy: PriorityPolicy,
        delta: u64,
        horizon: u64,
    ) -> ScheduleTrace {
        let ts = TaskSet::new("e", tasks, delta).unwrap();
        let cfg = ExecutorConfig::new(variant, policy, delta).unwrap();
        simulate(&ts, &cfg, horizon, 0).unwrap()
    }

    fn two_tasks() -> Vec<TaskSpec> {
        vec![TaskSpec::timer(1, MS, 4 * MS), TaskSpec::timer(2, 2 * MS, 6 * MS)]
    }

    #[test]
    fn priority_ro_without_overhead_is_ideal_np_rm() {
        let t = run(two_tasks(), ExecutorVariant::PriorityRO, PriorityPolicy::RateMonotonic, 0, 12 * MS);
        let seq: Vec<_> = t.execution_sequence().into_iter().map(|(id, s, f)| (id, s / MS, f / MS)).collect();
        assert_eq!(seq, vec![(1, 0, 1), (2, 1, 3), (1, 4, 5), (2, 6, 8), (1, 8, 9)]);
    }

    #[test]
    fn release_during_execution_prolongs_the_job() {
        // task 2 runs [0, 5); task 1's release at 2 suspends it for delta
        let delta = MS / 10;
        let tasks = vec![TaskSpec::timer(1, MS, 10 * MS).with_phase(2 * MS), TaskSpec::timer(2, 5 * MS, 10 * MS)];
        let t = run(tasks, ExecutorVariant::PriorityRO, PriorityPolicy::RateMonotonic, delta, 10 * MS);
        let first = &t.jobs[0];
        assert_eq!(first.task_id, 2);
        assert_eq!(first.enqueue_t, delta);
        assert_eq!(first.start_t, delta);
        assert_eq!(first.finish_t - first.start_t, 5 * MS + delta);
        let second = &t.jobs[1];
        assert_eq!(second.task_id, 1);
        assert_eq!(second.nominal_ts, 2 * MS);
        assert_eq!(second.enqueue_t, 2 * MS + delta);
        assert_eq!(second.start_t, first.finish_t);
    }

    #[test]
    fn simultaneous_releases_cost_delta_each() {
        let delta = MS / 10;
        let t = run(two_tasks(), ExecutorVariant::PriorityRO, PriorityPolicy::RateMonotonic, delta, 4 * MS);
        assert_eq!(t.jobs[0].task_id, 1);
        assert_eq!(t.jobs[0].start_t, 2 * delta);
        assert_eq!(t.jobs[0].enqueue_t, delta);
        assert_eq!(t.jobs[1].enqueue_t, 2 * delta);
    }

    #[test]
    fn fifo_re_executes_in_timestamp_order_and_skips() {
        // the 25 ms job keeps the timer thread busy past two 10 ms timestamps
        let tasks = vec![TaskSpec::timer(1, 25 * MS, 100 * MS), TaskSpec::timer(2, MS, 10 * MS)];
        let t = run(tasks, ExecutorVariant::EventsFifoRE, PriorityPolicy::Fifo, 0, 100 * MS);
        assert_eq!(t.jobs[0].task_id, 1);
        assert_eq!(t.jobs[1].task_id, 2);
        assert_eq!(t.jobs[1].start_t, 25 * MS);
        let fast: Vec<_> = t.jobs_of(2).map(|j| j.nominal_ts / MS).collect();
        assert_eq!(&fast[..2], &[0, 30]);
        assert_eq!(t.dropped(2), 2);
    }

    #[test]
    fn priority_re_orders_released_timers() {
        let tasks = vec![
            TaskSpec::timer(1, 3 * MS, 20 * MS).with_priority(1),
            TaskSpec::timer(2, MS, 20 * MS).with_priority(2).with_phase(MS),
            TaskSpec::timer(3, MS, 20 * MS).with_priority(0).with_phase(2 * MS),
        ];
        let t = run(tasks, ExecutorVariant::PriorityRE, PriorityPolicy::FixedPriority, 0, 20 * MS);
        let order: Vec<_> = t.jobs.iter().map(|j| j.task_id).collect();
        assert_eq!(order, vec![1, 3, 2]);
    }

    #[test]
    fn re_runs_subscriptions_only_when_timers_idle() {
        let tasks = vec![
            TaskSpec::timer(0, 2 * MS, 10 * MS).publishing(1),
            TaskSpec::subscription(1, 3 * MS, 1),
            TaskSpec::timer(2, MS, 10 * MS).with_phase(2 * MS),
        ];
        let t = run(tasks, ExecutorVariant::PriorityRE, PriorityPolicy::RateMonotonic, 0, 10 * MS);
        let seq: Vec<_> = t.execution_sequence().into_iter().map(|(id, s, f)| (id, s / MS, f / MS)).collect();
        assert_eq!(seq, vec![(0, 0, 2), (2, 2, 3), (1, 3, 6)]);
    }

    #[test]
    fn ro_subscription_inherits_publisher_priority() {
        let tasks = vec![
            TaskSpec::timer(0, 2 * MS, 5 * MS).with_priority(0).publishing(1),
            TaskSpec::subscription(1, MS, 1).with_priority(2),
            TaskSpec::timer(2, MS, 50 * MS).with_priority(1).with_phase(MS),
        ];
        let t = run(tasks, ExecutorVariant::PriorityRO, PriorityPolicy::FixedPriority, 0, 5 * MS);
        let seq: Vec<_> = t.execution_sequence().into_iter().map(|(id, s, f)| (id, s / MS, f / MS)).collect();
        assert_eq!(seq, vec![(0, 0, 2), (1, 2, 3), (2, 3, 4)]);
    }

    #[test]
    fn queue_overflow_drops_oldest_message() {
        let tasks = vec![
            TaskSpec::timer(0, MS, 2 * MS).with_priority(0).publishing(1),
            TaskSpec::subscription(1, MS, 1).with_priority(2),
            // keeps the timer thread busy so the subscription starves until the horizon
            TaskSpec::timer(2, MS, 2 * MS).with_priority(1).with_phase(MS),
        ];
        let ts = TaskSet::new("q", tasks, 0).unwrap();
        let cfg = ExecutorConfig::new(ExecutorVariant::PriorityRE, PriorityPolicy::FixedPriority, 0)
            .unwrap()
            .with_queue_depth(2);
        let t = simulate(&ts, &cfg, 20 * MS, 0).unwrap();
        assert_eq!(t.dropped(1), 8);
        let executed = t.jobs_of(1).count() as u64;
        assert_eq!(executed + t.dropped(1), t.jobs_of(0).count() as u64);
    }
}
