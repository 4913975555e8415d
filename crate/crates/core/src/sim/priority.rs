use crate::model::{PriorityPolicy, TaskSet};
use crate::time::Instant;

use super::SimError;

/// Ordering key of a ready job; smaller keys run first, equal keys by release order.
pub(crate) type JobKey = [u64; 4];

/// Per-task static parts of the job ordering under one policy.
///
/// Timers use their own rank: `(priority, id)` for FP and `(period, id)` for
/// RM. A subscription inherits the smallest rank of its upstream
/// publishers, transitively, and then falls back to its own priority and id.
#[derive(Debug, Clone)]
pub(crate) struct KeyTable {
    policy: PriorityPolicy,
    rank: Vec<[u64; 2]>,
    own: Vec<[u64; 2]>,
}

impl KeyTable {
    pub(crate) fn new(taskset: &TaskSet, policy: PriorityPolicy) -> Result<Self, SimError> {
        let tasks = taskset.tasks();
        if policy == PriorityPolicy::Edf {
            if let Some(t) = tasks.iter().find(|t| t.deadline.is_none()) {
                return Err(SimError::EdfWithoutDeadline(t.id));
            }
        }
        let own: Vec<[u64; 2]> = tasks.iter().map(|t| [u64::from(t.priority), u64::from(t.id)]).collect();
        let mut rank: Vec<Option<[u64; 2]>> = tasks
            .iter()
            .map(|t| {
                t.is_timer().then(|| match policy {
                    PriorityPolicy::RateMonotonic => [t.period(), u64::from(t.id)],
                    _ => [u64::from(t.priority), u64::from(t.id)],
                })
            })
            .collect();
        // propagate along publisher -> subscriber edges until stable
        loop {
            let mut changed = false;
            for (i, sub) in tasks.iter().enumerate() {
                if sub.is_timer() {
                    continue;
                }
                let inherited = tasks
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.publishes_to.is_some() && p.publishes_to == sub.subscribes_to)
                    .filter_map(|(j, _)| rank[j])
                    .min();
                if let Some(r) = inherited {
                    if rank[i].is_none_or(|cur| r < cur) {
                        rank[i] = Some(r);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let rank = rank
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.unwrap_or_else(|| match policy {
                    PriorityPolicy::RateMonotonic => [tasks[i].period.unwrap_or(u64::MAX), u64::from(tasks[i].id)],
                    _ => own[i],
                })
            })
            .collect();
        Ok(KeyTable { policy, rank, own })
    }

    pub(crate) fn key(&self, task: usize, abs_deadline: Option<Instant>) -> JobKey {
        let [p, id] = self.own[task];
        match self.policy {
            PriorityPolicy::Fifo => [0; 4],
            PriorityPolicy::Edf => [abs_deadline.unwrap_or(u64::MAX), p, id, 0],
            PriorityPolicy::FixedPriority | PriorityPolicy::RateMonotonic => {
                let [a, b] = self.rank[task];
                [a, b, p, id]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskSpec;

    #[test]
    fn subscriptions_inherit_upstream_rank() {
        let ts = TaskSet::new(
            "x",
            vec![
                TaskSpec::timer(0, 1, 100).with_priority(5).publishing(1),
                TaskSpec::timer(1, 1, 10).with_priority(0),
                TaskSpec::subscription(2, 1, 1).with_priority(9).publishing(2),
                TaskSpec::subscription(3, 1, 2).with_priority(1),
            ],
            0,
        )
        .unwrap();
        let rm = KeyTable::new(&ts, PriorityPolicy::RateMonotonic).unwrap();
        assert_eq!(rm.key(2, None), [100, 0, 9, 2]);
        assert_eq!(rm.key(3, None), [100, 0, 1, 3]);
        assert!(rm.key(1, None) < rm.key(3, None));
        let fp = KeyTable::new(&ts, PriorityPolicy::FixedPriority).unwrap();
        assert_eq!(fp.key(3, None), [5, 0, 1, 3]);
        assert!(fp.key(1, None) < fp.key(3, None));
        assert!(fp.key(3, None) < fp.key(0, None));
    }

    #[test]
    fn edf_needs_subscription_deadlines() {
        let ts = TaskSet::new("x", vec![TaskSpec::timer(0, 1, 10).publishing(1), TaskSpec::subscription(1, 1, 1)], 0)
            .unwrap();
        assert!(matches!(KeyTable::new(&ts, PriorityPolicy::Edf), Err(SimError::EdfWithoutDeadline(1))));
    }
}
