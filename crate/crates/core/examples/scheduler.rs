//! Priority queue, reservations and wait estimates on a simulated clock.

use chrono::TimeDelta;
use qruntime_core::backend::DeviceConfig;
use qruntime_core::clock::epoch;
use qruntime_core::scheduler::{JobDescriptor, JobItem, Scheduler, SchedulerConfig, WorkerInfo};
use qruntime_core::transpiler::BackendCapabilities;

const BELL: &str = "qreg q[2]; creg c[2]; h q[0]; cx q[0], q[1]; measure q -> c;";

fn main() {
    let t0 = epoch();
    let mut s = Scheduler::in_memory(
        [BackendCapabilities::line("sim-a", 5), BackendCapabilities::ring("sim-b", 5)],
        SchedulerConfig::default(),
    );
    s.register_worker(WorkerInfo::new("w1", ["zne", "readout_mitigation"]), t0).unwrap();
    // `auto` routing ranks backends by estimated fidelity, so it needs calibrations
    for device in [DeviceConfig::linear("sim-a", 5), DeviceConfig::ring("sim-b", 5)] {
        let cal = device.initial_calibration(&device.capabilities(), t0);
        s.record_calibration(cal, t0).unwrap();
    }

    let low = s.submit(JobDescriptor::single("ana", "sim-a", JobItem::new(BELL, 4000)), t0).unwrap();
    let high = s
        .submit(JobDescriptor::single("ben", "sim-a", JobItem::new(BELL, 1000)).with_priority(5), t0)
        .unwrap();
    let auto = s.submit(JobDescriptor::single("ana", "auto", JobItem::new(BELL, 100)), t0).unwrap();
    for id in [&low, &high, &auto] {
        let job = s.job(id).unwrap();
        let eta = s.eta(id, t0).unwrap().unwrap_or_default();
        println!("{id} on {} prio {:>2}: starts in {} ms", job.backend_id, job.descriptor.priority, eta.num_milliseconds());
    }

    let r = s.reserve("sim-b", "carla", t0 + TimeDelta::minutes(1), Some(TimeDelta::minutes(30)), t0).unwrap();
    println!("reservation {} on {} from {} to {}", r.reservation_id, r.backend_id, r.start, r.end());
    match s.reserve("sim-b", "dan", t0 + TimeDelta::minutes(10), None, t0) {
        Err(e) => println!("overlapping reservation refused: {} ({e})", e.code()),
        Ok(_) => unreachable!(),
    }

    for a in s.assign(t0).unwrap() {
        println!("assigned {} to {}", a.job_id, a.worker_id);
    }
}
