//! Comparisons between latency sources and batch checks over generated sets.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{analyze, AnalysisError, ReleaseOption};
use crate::gen::{generate_workload, GenError, GenParams};
use crate::model::{hyperperiod, ChainMode, PriorityPolicy, TaskId, TaskSet, Workload};
use crate::sim::{
    measure_sampled_latency, measure_sequence_latency, Executor, ExecutorConfig, ScheduleTrace, SimError,
};
use crate::time::{ns_to_ms, Duration};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Where a per-chain latency comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencySource {
    Bound { policy: PriorityPolicy, option: ReleaseOption, delta: Duration },
    Simulated { executor: Executor, horizon: Duration, seed: u64 },
}

/// Worst latency per chain; `None` where the source gives no value.
pub fn chain_latencies(
    workload: &Workload,
    source: &LatencySource,
) -> Result<BTreeMap<u32, Option<Duration>>, ExperimentError> {
    match source {
        LatencySource::Bound { policy, option, delta } => {
            let report = analyze(&workload.taskset, *policy, *option, *delta, &workload.chains)?;
            Ok(report.chains.iter().map(|c| (c.chain_id, c.latency_bound)).collect())
        }
        LatencySource::Simulated { executor, horizon, seed } => {
            let trace = executor.run(&workload.taskset, *horizon, *seed)?;
            workload
                .chains
                .iter()
                .map(|c| {
                    let measured = match c.mode {
                        ChainMode::Sampled => measure_sampled_latency(&trace, c),
                        ChainMode::Sequence => measure_sequence_latency(&trace, c),
                    };
                    match measured {
                        Ok(l) => Ok((c.id, Some(l))),
                        Err(SimError::NoCompletePropagation(_)) => Ok((c.id, None)),
                        Err(e) => Err(e.into()),
                    }
                })
                .collect()
        }
    }
}

/// `(a - b) / a`; positive when `b` is the lower latency.
pub fn normalized_reduction(a: Duration, b: Duration) -> Option<f64> {
    (a > 0).then(|| (a as f64 - b as f64) / a as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub chain_id: u32,
    pub a_ms: Option<f64>,
    pub b_ms: Option<f64>,
    pub reduction: Option<f64>,
}

/// Per-chain reduction of `b` against `a`. Chains missing from either side
/// are kept with an empty reduction.
pub fn compare(a: &BTreeMap<u32, Option<Duration>>, b: &BTreeMap<u32, Option<Duration>>) -> Vec<ComparisonRow> {
    a.iter()
        .map(|(&chain_id, &la)| {
            let lb = b.get(&chain_id).copied().flatten();
            ComparisonRow {
                chain_id,
                a_ms: la.map(ns_to_ms),
                b_ms: lb.map(ns_to_ms),
                reduction: la.zip(lb).and_then(|(x, y)| normalized_reduction(x, y)),
            }
        })
        .collect()
}

fn csv_string<R: Serialize>(rows: &[R]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// `chain_id,a_ms,b_ms,reduction`
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    if rows.is_empty() {
        return "chain_id,a_ms,b_ms,reduction\n".to_string();
    }
    csv_string(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// `bins` equal-width bins over `[lo, hi]`; values outside are clamped into the edge bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<Bin> {
    assert!(bins > 0 && hi > lo);
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> =
        (0..bins).map(|i| Bin { lo: lo + i as f64 * width, hi: lo + (i + 1) as f64 * width, count: 0 }).collect();
    for &v in values {
        let i = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// `lo,hi,count`
pub fn histogram_csv(bins: &[Bin]) -> String {
    csv_string(bins)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

/// A simulated job that contradicts a certified bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub task_id: TaskId,
    pub bound: Duration,
    pub observed: Duration,
    pub deadline_miss: bool,
}

/// Analyzes `taskset` and, if certified, simulates the matching priority
/// executor over `hyperperiods` synchronous hyperperiods.
///
/// Returns `None` when the set is not certified (including unbounded overhead).
pub fn check_soundness(
    taskset: &TaskSet,
    policy: PriorityPolicy,
    option: ReleaseOption,
    delta: Duration,
    hyperperiods: u64,
) -> Result<Option<Vec<Violation>>, ExperimentError> {
    let report = match analyze(taskset, policy, option, delta, &[]) {
        Ok(r) if r.schedulable => r,
        Ok(_) | Err(AnalysisError::OverheadUnbounded(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let config = match option {
        ReleaseOption::Ro => ExecutorConfig::priority_ro(policy, delta)?,
        ReleaseOption::Re => ExecutorConfig::priority_re(policy, delta)?,
    };
    let trace = crate::sim::simulate(taskset, &config, hyperperiods * hyperperiod(taskset)?, 0)?;
    Ok(Some(violations(&trace, &report.wcrts())))
}

/// Jobs whose response exceeds the bound or whose deadline passed.
pub fn violations(trace: &ScheduleTrace, bounds: &BTreeMap<TaskId, Duration>) -> Vec<Violation> {
    trace
        .jobs
        .iter()
        .filter_map(|j| {
            let bound = *bounds.get(&j.task_id)?;
            let observed = j.response_time();
            (observed > bound || j.missed_deadline()).then_some(Violation {
                task_id: j.task_id,
                bound,
                observed,
                deadline_miss: j.missed_deadline(),
            })
        })
        .collect()
}

/// Per-chain reductions of simulated `b` latency against simulated `a`
/// latency over a batch of generated workloads.
pub fn latency_reduction_batch(
    params: &[GenParams],
    a: &Executor,
    b: &Executor,
    hyperperiods: u64,
) -> Result<Vec<f64>, ExperimentError> {
    let per_set: Vec<Vec<f64>> = params
        .par_iter()
        .map(|p| {
            let w = generate_workload(p)?;
            let horizon = hyperperiods * hyperperiod(&w.taskset)?;
            let src =
                |executor: &Executor| LatencySource::Simulated { executor: executor.clone(), horizon, seed: p.seed };
            let la = chain_latencies(&w, &src(a))?;
            let lb = chain_latencies(&w, &src(b))?;
            Ok(compare(&la, &lb).into_iter().filter_map(|r| r.reduction).collect())
        })
        .collect::<Result<_, ExperimentError>>()?;
    Ok(per_set.into_iter().flatten().collect())
}
