use crate::model::{TaskId, TaskSet, TaskSpec};
use crate::time::{ceil_div, Duration};

/// Smallest `t` with `t = C_k + B_k + sum_{hp} ceil(t/T_i) * C_i`, iterated
/// upward from zero, where `B_k` is the largest wcet of a lower-priority task.
///
/// Lower `priority` values are higher priorities. Returns `None` as soon as
/// an iterate passes `D_k`, or when a higher-priority task has no period.
pub fn wcrt_np_fp(taskset: &TaskSet, k: TaskId) -> Option<Duration> {
    let task = taskset.task(k)?;
    let deadline = task.deadline?;
    let mut blocking = 0;
    let mut hp: Vec<&TaskSpec> = Vec::new();
    for other in taskset.tasks().iter().filter(|t| t.id != k) {
        if (other.priority, other.id) < (task.priority, task.id) {
            hp.push(other);
        } else {
            blocking = blocking.max(other.wcet);
        }
    }
    let hp: Vec<(Duration, Duration)> = hp.iter().map(|t| t.period.map(|p| (p, t.wcet))).collect::<Option<_>>()?;
    let base = task.wcet + blocking;
    let mut t = 0;
    loop {
        let next = base + hp.iter().map(|&(p, c)| ceil_div(t, p) * c).sum::<u64>();
        if next > deadline {
            return None;
        }
        if next == t {
            return Some(t);
        }
        t = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assign_priorities, PriorityPolicy};

    fn rm(tasks: Vec<TaskSpec>) -> TaskSet {
        let ts = TaskSet::new("fp", tasks, 0).unwrap();
        assign_priorities(&ts, PriorityPolicy::RateMonotonic).unwrap()
    }

    #[test]
    fn two_task_example() {
        let ts = rm(vec![TaskSpec::timer(1, 1, 4), TaskSpec::timer(2, 2, 6)]);
        assert_eq!(wcrt_np_fp(&ts, 1), Some(3));
        assert_eq!(wcrt_np_fp(&ts, 2), Some(3));
    }

    #[test]
    fn single_task_is_its_wcet() {
        let ts = rm(vec![TaskSpec::timer(0, 7, 10)]);
        assert_eq!(wcrt_np_fp(&ts, 0), Some(7));
    }

    #[test]
    fn none_past_deadline() {
        let ts = rm(vec![TaskSpec::timer(0, 3, 4), TaskSpec::timer(1, 3, 8)]);
        // blocking 3 + own 3 > 4
        assert_eq!(wcrt_np_fp(&ts, 0), None);
        assert_eq!(wcrt_np_fp(&ts, 7), None);
    }

    #[test]
    fn interference_iterates() {
        let ts = rm(vec![TaskSpec::timer(0, 1, 4), TaskSpec::timer(1, 1, 5), TaskSpec::timer(2, 4, 20)]);
        // fixed point: 4 + ceil(t/4) + ceil(t/5); t = 8: 4 + 2 + 2 = 8
        assert_eq!(wcrt_np_fp(&ts, 2), Some(8));
    }
}
