use std::collections::BTreeSet;

use npexec::gen::{generate_sequence_workload, generate_workload, GenParams, WATERS_PERIODS};
use npexec::model::ChainMode;
use npexec::time::NS_PER_MS;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_workloads_respect_their_parameters(
        u in 0.05f64..=1.0,
        lo in 1usize..30,
        span in 0usize..30,
        seed in any::<u64>(),
    ) {
        let params = GenParams::default()
            .with_utilization(u)
            .with_tasks(lo, lo + span)
            .with_chains(1, 8)
            .with_chain_length(2, 6)
            .with_seed(seed);
        let w = generate_workload(&params).unwrap();
        let ts = &w.taskset;
        prop_assert!((lo..=lo + span).contains(&ts.len()));
        let total = ts.utilization();
        prop_assert!(total <= u + 1e-12 && total >= u - 1e-6, "{} vs {}", total, u);
        let periods: BTreeSet<u64> = WATERS_PERIODS.iter().map(|p| p.0 * NS_PER_MS).collect();
        for t in ts.tasks() {
            prop_assert!(periods.contains(&t.period()));
            prop_assert!(t.wcet > 0 && t.wcet < t.period());
            prop_assert_eq!(t.deadline, Some(t.period()));
        }
        let mut by_rm: Vec<_> = ts.tasks().iter().collect();
        by_rm.sort_by_key(|t| t.priority);
        prop_assert!(by_rm.windows(2).all(|p| (p[0].period(), p[0].id) < (p[1].period(), p[1].id)));
        for c in &w.chains {
            prop_assert!(c.task_ids.len() >= 2.min(ts.len()) && c.task_ids.len() <= 6);
            prop_assert_eq!(c.task_ids.iter().collect::<BTreeSet<_>>().len(), c.task_ids.len());
        }
        prop_assert_eq!(&w, &generate_workload(&params).unwrap());
    }

    #[test]
    fn sequence_workloads_hang_off_one_timer(u in 0.1f64..0.9, seed in any::<u64>()) {
        let params = GenParams::default()
            .with_utilization(u)
            .with_tasks(4, 20)
            .with_chains(1, 4)
            .with_chain_length(2, 4)
            .with_seed(seed);
        let w = generate_sequence_workload(&params).unwrap();
        let mut used = BTreeSet::new();
        for c in &w.chains {
            prop_assert_eq!(c.mode, ChainMode::Sequence);
            prop_assert!(w.taskset.task(c.task_ids[0]).unwrap().is_timer());
            for id in &c.task_ids[1..] {
                prop_assert!(!w.taskset.task(*id).unwrap().is_timer());
            }
            for id in &c.task_ids {
                prop_assert!(used.insert(*id));
            }
        }
    }
}

#[test]
fn high_utilization_sets_use_automotive_periods() {
    let periods: BTreeSet<u64> = WATERS_PERIODS.iter().map(|p| p.0 * NS_PER_MS).collect();
    for seed in 0..1000 {
        let params = GenParams::default().with_utilization(0.9).with_seed(seed);
        let w = generate_workload(&params).unwrap();
        assert!(w.taskset.tasks().iter().all(|t| periods.contains(&t.period())), "seed {seed}");
        let u = w.taskset.utilization();
        assert!((0.9 - 1e-6..=0.9 + 1e-12).contains(&u), "seed {seed}: {u}");
    }
}

#[test]
fn chain_lengths_are_uniform() {
    let mut counts = [0u64; 16];
    let mut total = 0u64;
    for seed in 0..300 {
        let params = GenParams::default().with_tasks(20, 40).with_seed(seed);
        for c in generate_workload(&params).unwrap().chains {
            counts[c.task_ids.len()] += 1;
            total += 1;
        }
    }
    let p = 1.0 / 14.0;
    let mean = total as f64 * p;
    let sigma = (total as f64 * p * (1.0 - p)).sqrt();
    for (len, &n) in counts.iter().enumerate().skip(2) {
        assert!((n as f64 - mean).abs() <= 3.0 * sigma, "length {len}: {n} vs {mean:.1} ± {:.1}", 3.0 * sigma);
    }
    assert_eq!(counts[0] + counts[1], 0);
}
