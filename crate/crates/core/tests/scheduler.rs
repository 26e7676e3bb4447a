mod support;

use chrono::TimeDelta;
use proptest::prelude::*;
use qruntime_core::clock::epoch;
use qruntime_core::scheduler::{JobDescriptor, JobItem, JobStatus, Scheduler, SchedulerConfig, WorkerInfo};
use qruntime_core::transpiler::BackendCapabilities;
use support::trace::{simulate, ShotClock, BELL};

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, .. ProptestConfig::default() })]

    #[test]
    fn random_traces_keep_scheduler_invariants(seed in any::<u64>()) {
        let r = simulate(seed, 500);
        prop_assert!(r.submitted.len() > 300, "only {} admitted", r.submitted.len());
        r.check_priority_order().map_err(TestCaseError::fail)?;
        r.check_reservation_exclusivity().map_err(TestCaseError::fail)?;
        r.check_contiguity().map_err(TestCaseError::fail)?;
        r.check_user_limit().map_err(TestCaseError::fail)?;
        r.check_termination().map_err(TestCaseError::fail)?;
    }
}

#[test]
fn trace_exercises_every_outcome() {
    let r = simulate(7, 500);
    let count = |s: JobStatus| r.terminal.values().filter(|v| **v == s).count();
    assert!(count(JobStatus::Completed) > 0);
    assert!(count(JobStatus::Cancelled) > 0);
    assert!(r.rejected_by_limit > 0);
    assert!(!r.reservations.is_empty());
    assert!(r.starts.iter().filter(|s| s.eligible.len() > 1).count() > 50);
    assert!(r.runs.iter().filter(|x| x.session.is_some()).count() >= 10);
    assert!(r.runs.len() > r.terminal.len() - count(JobStatus::Cancelled));
}

#[test]
fn eta_of_thirty_second_example() {
    let t0 = epoch();
    let mut s = Scheduler::in_memory([BackendCapabilities::line("b", 3)], SchedulerConfig::default())
        .with_estimator(std::sync::Arc::new(ShotClock));
    s.register_worker(WorkerInfo::new("w", Vec::<String>::new()), t0).unwrap();
    // 1000 shots = 10 s, 2000 shots = 20 s under the shot clock
    s.submit(JobDescriptor::single("a", "b", JobItem::new(BELL, 1000)), t0).unwrap();
    s.submit(JobDescriptor::single("b", "b", JobItem::new(BELL, 2000)), t0).unwrap();
    let target = s.submit(JobDescriptor::single("c", "b", JobItem::new(BELL, 100)), t0).unwrap();
    assert_eq!(s.eta(&target, t0).unwrap(), Some(TimeDelta::seconds(30)));
}

#[test]
fn eta_of_lone_job_is_zero() {
    let t0 = epoch();
    let mut s = Scheduler::in_memory([BackendCapabilities::line("b", 3)], SchedulerConfig::default());
    let id = s.submit(JobDescriptor::single("a", "b", JobItem::new(BELL, 10)), t0).unwrap();
    assert_eq!(s.eta(&id, t0).unwrap(), Some(TimeDelta::zero()));
}

#[test]
fn eta_waits_out_foreign_reservation() {
    let t0 = epoch();
    let mut s = Scheduler::in_memory([BackendCapabilities::line("b", 3)], SchedulerConfig::default());
    s.reserve("b", "owner", t0, None, t0).unwrap();
    let id = s.submit(JobDescriptor::single("a", "b", JobItem::new(BELL, 10)), t0).unwrap();
    assert!(s.eta(&id, t0).unwrap().unwrap() >= TimeDelta::minutes(15));
}

#[test]
fn sixth_concurrent_job_is_refused() {
    let t0 = epoch();
    let mut s = Scheduler::in_memory([BackendCapabilities::line("b", 3)], SchedulerConfig::default());
    for _ in 0..5 {
        s.submit(JobDescriptor::single("u", "b", JobItem::new(BELL, 10)), t0).unwrap();
    }
    let err = s.submit(JobDescriptor::single("u", "b", JobItem::new(BELL, 10)), t0).unwrap_err();
    assert_eq!(err.code(), "USER_LIMIT_EXCEEDED");
}

#[test]
fn lapsed_heartbeat_makes_worker_ineligible() {
    let t0 = epoch();
    let mut s = Scheduler::in_memory([BackendCapabilities::line("b", 3)], SchedulerConfig::default());
    s.register_worker(WorkerInfo::new("w", ["zne"]), t0).unwrap();
    let late = t0 + TimeDelta::seconds(31);
    s.expire_workers(late).unwrap();
    let d = JobDescriptor::single("u", "b", JobItem::new(BELL, 10).with_stage(qruntime_core::pipeline::StageSpec::named("zne")));
    assert_eq!(s.submit(d.clone(), late).unwrap_err().code(), "CAPABILITY_MISSING");
    s.register_worker(WorkerInfo::new("w", ["zne"]), late).unwrap();
    assert!(s.submit(d, late).is_ok());
}
