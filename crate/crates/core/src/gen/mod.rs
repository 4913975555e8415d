//! Synthetic task sets and chains, plus the seven-node driving case study.

mod sequence;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{assign_priorities, Chain, ChainMode, ModelError, PriorityPolicy, TaskSet, TaskSpec, Workload};
use crate::time::{Duration, NS_PER_MS};

pub use sequence::generate_sequence_workload;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("utilization {0} outside (0, 1]")]
    Utilization(f64),
    #[error("{0} range is empty or starts at zero")]
    Range(&'static str),
    #[error("period weights must be non-negative and sum to 1")]
    Weights,
    #[error("no case study at {0}% utilization (expected 60, 80 or 90)")]
    CaseStudy(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Automotive periods in ms with their benchmark shares.
pub const WATERS_PERIODS: [(u64, f64); 9] =
    [(1, 0.03), (2, 0.02), (5, 0.02), (10, 0.25), (20, 0.25), (50, 0.03), (100, 0.20), (200, 0.01), (1000, 0.04)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub utilization: f64,
    /// Inclusive bounds.
    pub tasks: (usize, usize),
    pub chains: (usize, usize),
    pub chain_length: (usize, usize),
    /// Period in ns and its probability.
    pub periods: Vec<(Duration, f64)>,
    pub delta: Duration,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            utilization: 0.6,
            tasks: (10, 200),
            chains: (5, 60),
            chain_length: (2, 15),
            periods: weighted_periods(&WATERS_PERIODS.map(|(p, _)| p)),
            delta: 0,
            seed: 0,
        }
    }
}

/// WATERS weights restricted to `periods_ms` and renormalized.
///
/// Periods outside the benchmark table get no weight.
pub fn weighted_periods(periods_ms: &[u64]) -> Vec<(Duration, f64)> {
    let picked: Vec<(u64, f64)> = WATERS_PERIODS.iter().copied().filter(|(p, _)| periods_ms.contains(p)).collect();
    let total: f64 = picked.iter().map(|p| p.1).sum();
    picked.into_iter().map(|(p, w)| (p * NS_PER_MS, w / total)).collect()
}

impl GenParams {
    pub fn with_utilization(mut self, u: f64) -> Self {
        self.utilization = u;
        self
    }

    pub fn with_tasks(mut self, min: usize, max: usize) -> Self {
        self.tasks = (min, max);
        self
    }

    pub fn with_chains(mut self, min: usize, max: usize) -> Self {
        self.chains = (min, max);
        self
    }

    pub fn with_chain_length(mut self, min: usize, max: usize) -> Self {
        self.chain_length = (min, max);
        self
    }

    pub fn with_periods_ms(mut self, periods_ms: &[u64]) -> Self {
        self.periods = weighted_periods(periods_ms);
        self
    }

    pub fn with_delta(mut self, delta: Duration) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.utilization > 0.0 && self.utilization <= 1.0) {
            return Err(GenError::Utilization(self.utilization));
        }
        for (name, (lo, hi)) in [("task count", self.tasks), ("chain length", self.chain_length)] {
            if lo == 0 || lo > hi {
                return Err(GenError::Range(name));
            }
        }
        if self.chains.0 > self.chains.1 {
            return Err(GenError::Range("chain count"));
        }
        let sum: f64 = self.periods.iter().map(|p| p.1).sum();
        if self.periods.is_empty()
            || self.periods.iter().any(|&(p, w)| p == 0 || w.is_nan() || w < 0.0)
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(GenError::Weights);
        }
        Ok(())
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest of `k` uniform draws, distributed as `r^(1/k)` without `powf`.
fn root_uniform<R: Rng>(rng: &mut R, k: usize) -> f64 {
    (0..k).map(|_| rng.gen::<f64>()).fold(0.0, f64::max)
}

/// UUniFast with discard of any vector holding a value outside `(0, 1)`.
pub fn uunifast_discard_with<R: Rng>(rng: &mut R, n: usize, total: f64) -> Vec<f64> {
    assert!(n >= 1 && total > 0.0 && total <= 1.0, "uunifast needs n >= 1 and 0 < U <= 1");
    loop {
        let mut sum = total;
        let mut out = Vec::with_capacity(n);
        for i in 1..n {
            let next = sum * root_uniform(rng, n - i);
            out.push(sum - next);
            sum = next;
        }
        out.push(sum);
        if out.iter().all(|&u| u > 0.0 && u < 1.0) || (n == 1 && total == 1.0) {
            return out;
        }
    }
}

pub fn uunifast_discard(n: usize, total: f64, seed: u64) -> Vec<f64> {
    uunifast_discard_with(&mut ChaCha8Rng::seed_from_u64(seed), n, total)
}

/// Draws periods and utilizations, floors `u * T` to whole ns, then hands the
/// rounding loss back to the longest-period tasks so the total stays within
/// 1e-6 below the target.
fn draw_tasks<R: Rng>(rng: &mut R, params: &GenParams, n: usize) -> Vec<(Duration, Duration)> {
    let weights = WeightedIndex::new(params.periods.iter().map(|p| p.1)).expect("validated weights");
    loop {
        let utils = uunifast_discard_with(rng, n, params.utilization);
        let mut tasks: Vec<(Duration, Duration)> = utils
            .iter()
            .map(|&u| {
                let period = params.periods[weights.sample(rng)].0;
                ((u * period as f64).floor() as u64, period)
            })
            .collect();
        if tasks.iter().any(|&(c, _)| c == 0) {
            continue;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(tasks[i].1));
        for i in order {
            let used: f64 = tasks.iter().map(|&(c, t)| c as f64 / t as f64).sum();
            let (c, t) = tasks[i];
            let room = ((params.utilization - used) * t as f64).floor();
            if room < 1.0 {
                continue;
            }
            let mut grown = (c + room as u64).min(t - 1);
            if grown > c && used + (grown - c) as f64 / t as f64 > params.utilization {
                grown -= 1;
            }
            tasks[i].0 = grown;
        }
        return tasks;
    }
}

/// Random timer set with implicit deadlines, zero phases and RM priorities.
pub fn generate_taskset(params: &GenParams) -> Result<TaskSet, GenError> {
    params.validate()?;
    let mut rng = rng_for(params.seed, 0);
    let n = rng.gen_range(params.tasks.0..=params.tasks.1);
    let specs = draw_tasks(&mut rng, params, n)
        .into_iter()
        .enumerate()
        .map(|(i, (c, t))| TaskSpec::timer(i as u32, c, t))
        .collect();
    let name = format!("gen-u{}-s{}", params.utilization, params.seed);
    let ts = TaskSet::new(name, specs, params.delta)?;
    Ok(assign_priorities(&ts, PriorityPolicy::RateMonotonic)?)
}

/// Sampled-mode chains over distinct random tasks of `taskset`.
///
/// Lengths above the task count are clamped with a warning.
pub fn generate_chains(taskset: &TaskSet, params: &GenParams) -> Result<Vec<Chain>, GenError> {
    params.validate()?;
    let mut rng = rng_for(params.seed, 1);
    let ids: Vec<u32> = taskset.tasks().iter().map(|t| t.id).collect();
    let count = rng.gen_range(params.chains.0..=params.chains.1);
    let chains = (0..count)
        .map(|c| {
            let mut len = rng.gen_range(params.chain_length.0..=params.chain_length.1);
            if len > ids.len() {
                log::warn!("chain {c}: length {len} clamped to {} tasks", ids.len());
                len = ids.len();
            }
            let tasks = ids.choose_multiple(&mut rng, len).copied().collect();
            Chain::new(c as u32, ChainMode::Sampled, tasks)
        })
        .collect();
    Ok(chains)
}

/// Task set and sampled chains from one seed.
pub fn generate_workload(params: &GenParams) -> Result<Workload, GenError> {
    let taskset = generate_taskset(params)?;
    let chains = generate_chains(&taskset, params)?;
    Ok(Workload::new(taskset, chains)?)
}

pub const CASESTUDY_IMU: u32 = 6;
pub const CASESTUDY_CAMERAS: [u32; 4] = [0, 1, 2, 3];
pub const CASESTUDY_LIDARS: [u32; 2] = [4, 5];

/// Four 84 ms cameras, two 200 ms LiDARs and a 30 ms IMU with delta 0.12 ms.
///
/// Camera wcet is 10, 14 or 16 ms for 60, 80 or 90.
pub fn casestudy(util: u32) -> Result<TaskSet, GenError> {
    let camera = match util {
        60 => 10,
        80 => 14,
        90 => 16,
        other => return Err(GenError::CaseStudy(other)),
    } * NS_PER_MS;
    let mut tasks: Vec<TaskSpec> =
        CASESTUDY_CAMERAS.iter().map(|&id| TaskSpec::timer(id, camera, 84 * NS_PER_MS)).collect();
    tasks.extend(CASESTUDY_LIDARS.iter().map(|&id| TaskSpec::timer(id, 10 * NS_PER_MS, 200 * NS_PER_MS)));
    tasks.push(TaskSpec::timer(CASESTUDY_IMU, NS_PER_MS, 30 * NS_PER_MS));
    let ts = TaskSet::new(format!("casestudy-{util}"), tasks, 120_000)?;
    Ok(assign_priorities(&ts, PriorityPolicy::RateMonotonic)?)
}

/// The case study with two sampled chains, IMU to camera and camera to LiDAR,
/// each through the lowest-priority node of its class.
pub fn casestudy_workload(util: u32) -> Result<Workload, GenError> {
    let chains = vec![
        Chain::new(0, ChainMode::Sampled, vec![CASESTUDY_IMU, CASESTUDY_CAMERAS[3]]),
        Chain::new(1, ChainMode::Sampled, vec![CASESTUDY_CAMERAS[3], CASESTUDY_LIDARS[1]]),
    ];
    Ok(Workload::new(casestudy(util)?, chains)?)
}
