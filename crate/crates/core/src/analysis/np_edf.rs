use std::collections::BTreeSet;

use crate::model::{hyperperiod, TaskSet, TaskSpec};
use crate::time::{ceil_div, Duration};

/// Demand of jobs of `task` released and due inside any window of length `t`.
pub fn dbf(task: &TaskSpec, t: Duration) -> Duration {
    let (Some(deadline), Some(period)) = (task.deadline, task.period) else {
        return 0;
    };
    if t < deadline {
        return 0;
    }
    ((t - deadline) / period + 1) * task.wcet
}

fn utilization_exceeds_one(tasks: &[(Duration, Duration, Duration)], h: Option<Duration>) -> bool {
    match h {
        Some(h) => {
            let demand: u128 = tasks.iter().map(|&(c, _, t)| u128::from(c) * u128::from(h / t)).sum();
            demand > u128::from(h)
        }
        None => tasks.iter().map(|&(c, _, t)| c as f64 / t as f64).sum::<f64>() > 1.0,
    }
}

/// Non-preemptive EDF demand test with blocking from the longest job due later.
///
/// Checked at every absolute deadline `k*T_i + D_i` up to the shorter of the
/// hyperperiod and the synchronous busy period. Tasks without a period or
/// deadline make the set fail.
pub fn edf_schedulable(taskset: &TaskSet) -> bool {
    let Some(tasks) =
        taskset.tasks().iter().map(|t| Some((t.wcet, t.deadline?, t.period?))).collect::<Option<Vec<_>>>()
    else {
        return false;
    };
    if tasks.is_empty() {
        return true;
    }
    let h = hyperperiod(taskset).ok();
    if utilization_exceeds_one(&tasks, h) {
        return false;
    }
    let max_c = tasks.iter().map(|t| t.0).max().unwrap_or(0);
    let cap = h.unwrap_or(u64::MAX);
    let mut busy = max_c + tasks.iter().map(|t| t.0).sum::<u64>();
    while busy < cap {
        let next = max_c + tasks.iter().map(|&(c, _, t)| ceil_div(busy, t) * c).sum::<u64>();
        if next == busy {
            break;
        }
        busy = next;
    }
    let limit = busy.min(cap);
    let mut points = BTreeSet::new();
    for &(_, d, t) in &tasks {
        let mut p = d;
        while p <= limit {
            if p > 0 {
                points.insert(p);
            }
            p += t;
        }
    }
    points.into_iter().all(|t| {
        let blocking = tasks.iter().filter(|x| x.1 > t).map(|x| x.0).max().unwrap_or(0);
        let demand: u64 = tasks.iter().map(|&(c, d, p)| if t < d { 0 } else { ((t - d) / p + 1) * c }).sum();
        blocking + demand <= t
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbf_steps() {
        let task = TaskSpec::timer(0, 2, 4);
        assert_eq!(dbf(&task, 3), 0);
        assert_eq!(dbf(&task, 4), 2);
        assert_eq!(dbf(&task, 7), 2);
        assert_eq!(dbf(&task, 8), 4);
        assert_eq!(dbf(&task, 12), 6);
    }

    fn set(tasks: Vec<TaskSpec>) -> TaskSet {
        TaskSet::new("edf", tasks, 0).unwrap()
    }

    #[test]
    fn hand_examples() {
        assert!(edf_schedulable(&set(vec![TaskSpec::timer(1, 2, 4), TaskSpec::timer(2, 2, 8)])));
        assert!(!edf_schedulable(&set(vec![TaskSpec::timer(1, 3, 4), TaskSpec::timer(2, 2, 8)])));
        assert!(edf_schedulable(&set(vec![TaskSpec::timer(0, 10, 10)])));
        assert!(!edf_schedulable(&set(vec![TaskSpec::timer(0, 5, 10).with_deadline(4)])));
    }

    #[test]
    fn overload_is_rejected() {
        assert!(!edf_schedulable(&set(vec![TaskSpec::timer(0, 3, 4), TaskSpec::timer(1, 2, 8)])));
        assert!(!edf_schedulable(&set(vec![TaskSpec::timer(0, 11, 10).with_deadline(10)])));
    }
}
