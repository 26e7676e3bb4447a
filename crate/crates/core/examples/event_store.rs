//! Durable scheduler state: replay the log, snapshot it, survive a torn write.

use std::io::Write;

use qruntime_core::clock::epoch;
use qruntime_core::scheduler::{JobDescriptor, JobItem, Scheduler, SchedulerConfig, SchedulerEvent, SchedulerState};
use qruntime_core::store::EventLog;
use qruntime_core::transpiler::BackendCapabilities;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.log");
    let caps = || [BackendCapabilities::line("sim", 3)];
    {
        let log = EventLog::open(&path).unwrap();
        let mut s = Scheduler::new(log, caps(), SchedulerConfig::default()).unwrap();
        for i in 0..4 {
            let item = JobItem::new("qreg q[1]; creg c[1]; x q[0]; measure q[0] -> c[0];", 100 + i);
            s.submit(JobDescriptor::single("ana", "sim", item), epoch()).unwrap();
        }
        s.snapshot().unwrap();
        s.cancel("job-00000002", epoch()).unwrap();
    }
    print!("{}", std::fs::read_to_string(&path).unwrap().lines().last().unwrap());
    println!();

    // a crash in the middle of an append
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(b"{\"seq\":6,\"ts\":\"2026-01-").unwrap();
    drop(f);

    let log: EventLog<SchedulerEvent> = EventLog::open(&path).unwrap();
    if let Some(t) = log.truncation() {
        println!("dropped {} line(s) from seq {}: {}", t.dropped_lines, t.seq, t.reason);
    }
    let fast: SchedulerState = log.load().unwrap();
    let full: SchedulerState = log.replay();
    println!("head seq {}, {} jobs, snapshot+suffix == full replay: {}", log.last_seq(), full.jobs.len(), fast == full);
}
