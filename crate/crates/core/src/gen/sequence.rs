use rand::seq::SliceRandom;
use rand::Rng;

use super::{generate_taskset, rng_for, GenError, GenParams};
use crate::model::{assign_priorities, Chain, ChainMode, PriorityPolicy, TaskSet, TaskSpec, Workload};

/// Disjoint timer-headed sequences built from a generated timer set.
///
/// Every follower becomes a subscription to its predecessor's topic and keeps
/// its utilization at the head's rate: `C' = C * T_head / T`. Followers
/// declare the head period as minimum inter-arrival and deadline. Chains stop
/// once fewer than two unused tasks remain.
pub fn generate_sequence_workload(params: &GenParams) -> Result<Workload, GenError> {
    let base = generate_taskset(params)?;
    let mut rng = rng_for(params.seed, 2);
    let mut pool: Vec<&TaskSpec> = base.tasks().iter().collect();
    pool.shuffle(&mut rng);
    let mut specs: Vec<TaskSpec> = Vec::with_capacity(pool.len());
    let mut chains = Vec::new();
    let count = rng.gen_range(params.chains.0..=params.chains.1);
    for c in 0..count {
        if pool.len() < 2 {
            break;
        }
        let len = rng.gen_range(params.chain_length.0.max(2)..=params.chain_length.1.max(2)).min(pool.len());
        let members: Vec<&TaskSpec> = pool.drain(..len).collect();
        let head = members[0];
        let t_head = head.period();
        specs.push(head.clone().publishing(head.id));
        for (k, t) in members.iter().enumerate().skip(1) {
            let scaled = (u128::from(t.wcet) * u128::from(t_head) / u128::from(t.period())) as u64;
            let mut sub = TaskSpec::subscription(t.id, scaled.max(1), members[k - 1].id)
                .with_period(t_head)
                .with_deadline(t_head);
            if k + 1 < members.len() {
                sub = sub.publishing(t.id);
            }
            specs.push(sub);
        }
        chains.push(Chain::new(c as u32, ChainMode::Sequence, members.iter().map(|t| t.id).collect()));
    }
    specs.extend(pool.into_iter().cloned());
    specs.sort_by_key(|t| t.id);
    // placeholder priorities until RM reassigns them
    for t in &mut specs {
        t.priority = t.id;
    }
    let ts = TaskSet::new(format!("{}-seq", base.name()), specs, base.delta())?;
    let ts = assign_priorities(&ts, PriorityPolicy::RateMonotonic)?;
    Ok(Workload::new(ts, chains)?)
}
