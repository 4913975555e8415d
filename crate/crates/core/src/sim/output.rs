//! CSV renderings of a trace.

use serde::Serialize;

use super::ScheduleTrace;

#[derive(Serialize)]
struct TraceRow {
    task_id: u32,
    index: u64,
    nominal_ts_ns: u64,
    enqueue_ns: u64,
    start_ns: u64,
    finish_ns: u64,
    abs_deadline_ns: Option<u64>,
    skipped_before: u64,
}

#[derive(Serialize)]
struct DropRow {
    task_id: u32,
    skipped_at_ns: u64,
    count: u64,
}

fn write_rows<R: Serialize>(rows: impl IntoIterator<Item = R>, header: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// `task_id,index,nominal_ts_ns,enqueue_ns,start_ns,finish_ns,abs_deadline_ns,skipped_before`
pub fn trace_csv(trace: &ScheduleTrace) -> String {
    write_rows(
        trace.jobs.iter().map(|j| TraceRow {
            task_id: j.task_id,
            index: j.index,
            nominal_ts_ns: j.nominal_ts,
            enqueue_ns: j.enqueue_t,
            start_ns: j.start_t,
            finish_ns: j.finish_t,
            abs_deadline_ns: j.abs_deadline,
            skipped_before: j.skipped_before,
        }),
        &[
            "task_id",
            "index",
            "nominal_ts_ns",
            "enqueue_ns",
            "start_ns",
            "finish_ns",
            "abs_deadline_ns",
            "skipped_before",
        ],
    )
}

/// `task_id,skipped_at_ns,count`
pub fn drops_csv(trace: &ScheduleTrace) -> String {
    write_rows(
        trace.drops.iter().map(|d| DropRow { task_id: d.task_id, skipped_at_ns: d.skipped_at, count: d.count }),
        &["task_id", "skipped_at_ns", "count"],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PriorityPolicy, TaskSet, TaskSpec};
    use crate::sim::reference_np_schedule;

    #[test]
    fn header_and_rows() {
        let ts = TaskSet::new("o", vec![TaskSpec::timer(3, 5, 10)], 0).unwrap();
        let trace = reference_np_schedule(&ts, PriorityPolicy::FixedPriority, 20).unwrap();
        let csv = trace_csv(&trace);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "task_id,index,nominal_ts_ns,enqueue_ns,start_ns,finish_ns,abs_deadline_ns,skipped_before"
        );
        assert_eq!(lines[1], "3,0,0,0,0,5,10,0");
        assert_eq!(lines[2], "3,1,10,10,10,15,20,0");
        assert_eq!(drops_csv(&trace), "task_id,skipped_at_ns,count\n");
    }
}
