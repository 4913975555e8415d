//! Default executor: polling points alternating with processing windows.

use std::collections::VecDeque;

use super::{Pending, Runtime, ScheduleTrace};

/// Wait-set order: timers before subscriptions, each by (priority, id).
/// Polling costs nothing and the release overhead does not apply.
pub(super) fn run(mut rt: Runtime<'_>) -> ScheduleTrace {
    let tasks = rt.taskset.tasks();
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by_key(|&i| (!tasks[i].is_timer(), tasks[i].priority, tasks[i].id));
    let timer_of: Vec<Option<usize>> = (0..tasks.len()).map(|i| rt.timers.iter().position(|t| t.task == i)).collect();
    // undelivered messages per subscription, oldest first
    let mut messages: Vec<VecDeque<Pending>> = vec![VecDeque::new(); tasks.len()];
    let mut now = 0;

    loop {
        // polling point
        let mut wait_set = Vec::new();
        for &i in &order {
            match timer_of[i] {
                Some(k) => {
                    let t = &rt.timers[k];
                    if t.ts <= now && t.ts < rt.horizon {
                        wait_set.push(i);
                    }
                }
                None => {
                    if !messages[i].is_empty() {
                        wait_set.push(i);
                    }
                }
            }
        }
        if wait_set.is_empty() {
            match rt.next_timer_ts() {
                Some(ts) => {
                    now = now.max(ts);
                    continue;
                }
                None => break,
            }
        }

        // processing window
        for i in wait_set {
            let pending = match timer_of[i] {
                Some(k) => {
                    let p = rt.sample_timer(k, now);
                    rt.advance_timer(k, now);
                    p
                }
                None => {
                    let p = messages[i].pop_front().expect("sampled subscription has a message");
                    rt.take_from_inbox(i, p.seq);
                    p
                }
            };
            let start = now;
            let finish = start + rt.exec_time(i);
            let source = rt.record(pending, start, finish);
            now = finish;
            let (activations, cancelled) = rt.publish(i, source, now);
            for seq in cancelled {
                for queue in messages.iter_mut() {
                    queue.retain(|p| p.seq != seq);
                }
            }
            for a in activations {
                messages[a.task].push_back(a);
            }
        }
    }
    rt.finish()
}
