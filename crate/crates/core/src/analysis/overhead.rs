use super::AnalysisError;
use crate::model::{hyperperiod, TaskId, TaskSet};
use crate::time::{ceil_div, Duration};

/// Release-and-execute: at most one release per task precedes a job start.
pub fn overhead_re(n: usize, delta: Duration) -> Duration {
    n as u64 * delta
}

/// Release-only: releases of every task that can fall into the execution
/// window of a job of `task`.
///
/// The window `t0` is the least fixed point of
/// `t0 = C + sum_j ceil(t0 / T_j) * delta`, iterated upward from
/// `C + n * delta`; the returned overhead is `t0 - C`.
pub fn overhead_ro(taskset: &TaskSet, task: TaskId, delta: Duration) -> Result<Duration, AnalysisError> {
    let spec = taskset.task(task).ok_or(AnalysisError::UnknownTask(task))?;
    if delta == 0 {
        return Ok(0);
    }
    let periods: Vec<Duration> =
        taskset.tasks().iter().map(|t| t.period.ok_or(AnalysisError::Subscription(t.id))).collect::<Result<_, _>>()?;
    let limit = hyperperiod(taskset)?;
    let mut window = spec.wcet + periods.len() as u64 * delta;
    loop {
        let next = spec.wcet + periods.iter().map(|&p| ceil_div(window, p) * delta).sum::<u64>();
        if next <= window {
            return Ok(window - spec.wcet);
        }
        if next > limit {
            return Err(AnalysisError::OverheadUnbounded(task));
        }
        window = next;
    }
}

/// `n * delta`, valid only once schedulability has been shown with
/// [`overhead_ro`] and deadlines are constrained.
pub fn overhead_tightened(n: usize, delta: Duration, schedulability_proven: bool) -> Result<Duration, AnalysisError> {
    if !schedulability_proven {
        return Err(AnalysisError::TighteningUnproven);
    }
    Ok(n as u64 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskSpec;
    use crate::time::NS_PER_MS as MS;

    #[test]
    fn re_is_n_times_delta() {
        assert_eq!(overhead_re(7, 120_000), 840_000);
        assert_eq!(overhead_re(1, 500_000), 500_000);
        assert_eq!(overhead_re(3, 100_000), 300_000);
    }

    #[test]
    fn ro_single_task() {
        let ts = TaskSet::new("o", vec![TaskSpec::timer(0, MS, 10 * MS)], 0).unwrap();
        assert_eq!(overhead_ro(&ts, 0, MS / 10).unwrap(), MS / 10);
    }

    #[test]
    fn ro_hand_fixed_point() {
        // t = 25 + (ceil(t/10) + ceil(t/100)) * 0.5 settles at 27: 25 + (3 + 1) * 0.5
        let ts =
            TaskSet::new("o", vec![TaskSpec::timer(0, 25 * MS, 100 * MS), TaskSpec::timer(1, MS, 10 * MS)], 0).unwrap();
        assert_eq!(overhead_ro(&ts, 0, MS / 2).unwrap(), 2 * MS);
    }

    #[test]
    fn ro_diverges_past_hyperperiod() {
        // every release costs more than the shortest period leaves room for
        let ts = TaskSet::new("o", vec![TaskSpec::timer(0, 5 * MS, 10 * MS), TaskSpec::timer(1, MS, MS)], 0).unwrap();
        assert_eq!(overhead_ro(&ts, 0, 2 * MS), Err(AnalysisError::OverheadUnbounded(0)));
    }

    #[test]
    fn tightening_requires_proof() {
        assert_eq!(overhead_tightened(7, 120_000, true).unwrap(), 840_000);
        assert_eq!(overhead_tightened(2, 0, true).unwrap(), 0);
        assert_eq!(overhead_tightened(2, 5, false), Err(AnalysisError::TighteningUnproven));
    }
}
