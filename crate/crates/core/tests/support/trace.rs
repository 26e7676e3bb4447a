//! Simulated-clock driver for the scheduler plus checks written against the
//! recorded trace rather than the scheduler's own helpers.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use chrono::{DateTime, TimeDelta, Utc};
use qruntime_core::circuit::Circuit;
use qruntime_core::clock::epoch;
use qruntime_core::scheduler::{
    JobDescriptor, JobItem, JobStatus, ResourceEstimator, Scheduler, SchedulerConfig, SchedulerEvent, WorkerInfo,
};
use qruntime_core::store::Replayable;
use qruntime_core::transpiler::BackendCapabilities;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BELL: &str = "qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;";
pub const USER_LIMIT: usize = 5;
const BACKENDS: [&str; 3] = ["b1", "b2", "b3"];
/// Backend that only sees session traffic and no reservations.
const SESSION_BACKEND: &str = "b3";

/// One shot is worth 10 ms of device time, so durations are easy to read.
pub struct ShotClock;

impl ResourceEstimator for ShotClock {
    fn estimate(&self, _circuit: &Circuit, shots: u64, _caps: &BackendCapabilities) -> u64 {
        shots * 10_000_000
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub job_id: String,
    pub backend: String,
    pub user: String,
    pub session: Option<String>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// A start decision and the queue it was taken from.
#[derive(Debug, Clone)]
pub struct StartObs {
    pub at: DateTime<Utc>,
    pub backend: String,
    pub chosen: String,
    /// (priority, submitted, id, session) of every job an independent reading
    /// of the rules considers startable at that instant.
    pub eligible: Vec<(i64, DateTime<Utc>, String, Option<String>)>,
}

#[derive(Debug, Default)]
pub struct TraceReport {
    pub submitted: Vec<String>,
    pub rejected_by_limit: usize,
    pub runs: Vec<Run>,
    pub starts: Vec<StartObs>,
    pub limit_violations: Vec<String>,
    pub unterminated: Vec<String>,
    pub illegal_transitions: Vec<String>,
    pub reservations: Vec<(String, String, DateTime<Utc>, DateTime<Utc>)>,
    pub terminal: BTreeMap<String, JobStatus>,
    /// The scheduler's event log as written.
    pub log_lines: Vec<String>,
}

struct Active {
    end: DateTime<Utc>,
    fails: bool,
    run: usize,
}

fn eligible_now(s: &Scheduler, backend: &str, now: DateTime<Utc>) -> Vec<(i64, DateTime<Utc>, String, Option<String>)> {
    let st = s.state();
    st.jobs
        .values()
        .filter(|j| j.backend_id == backend && j.status == JobStatus::Queued && !j.cancel_requested)
        .filter(|j| j.not_before.is_none_or(|nb| nb <= now))
        .filter(|j| {
            let end = now + TimeDelta::nanoseconds(j.estimated_duration_ns as i64);
            !st.reservations.values().any(|r| {
                r.backend_id == backend
                    && r.user != j.descriptor.user
                    && r.status == qruntime_core::scheduler::ReservationStatus::Active
                    && r.start < end
                    && now < r.start + TimeDelta::seconds(r.duration_secs)
            })
        })
        .map(|j| {
            (
                j.descriptor.priority,
                j.submitted_at,
                j.job_id.clone(),
                j.descriptor.session_id.clone(),
            )
        })
        .collect()
}

/// Drives `n_jobs` random submissions through a scheduler on a 1 s tick.
pub fn simulate(seed: u64, n_jobs: usize) -> TraceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = epoch();
    let config = SchedulerConfig {
        user_limit: USER_LIMIT,
        ..SchedulerConfig::default()
    };
    let mut s = Scheduler::in_memory(BACKENDS.iter().map(|b| BackendCapabilities::line(*b, 3)), config)
        .with_estimator(std::sync::Arc::new(ShotClock));
    for w in ["w1", "w2"] {
        let mut info = WorkerInfo::new(w, ["zne", "readout_mitigation"]);
        info.max_parallel = 2;
        s.register_worker(info, t0).unwrap();
    }
    let users: Vec<String> = (0..8).map(|u| format!("user{u}")).collect();
    let mut report = TraceReport::default();

    // reservations on the shared backends
    for _ in 0..12 {
        let backend = BACKENDS[rng.random_range(0..2)];
        let user = &users[rng.random_range(0..users.len())];
        let start = t0 + TimeDelta::seconds(rng.random_range(10..1500));
        let dur = TimeDelta::seconds(rng.random_range(30..240));
        if let Ok(r) = s.reserve(backend, user, start, Some(dur), t0) {
            report
                .reservations
                .push((r.backend_id.clone(), r.user.clone(), r.start, r.end()));
        }
    }
    let session = s.open_session(&users[0], SESSION_BACKEND, None, t0).unwrap().session_id;

    // arrival schedule: (time, descriptor)
    let mut arrivals: Vec<(DateTime<Utc>, JobDescriptor)> = (0..n_jobs)
        .map(|i| {
            let at = t0 + TimeDelta::seconds(rng.random_range(0..1800));
            let in_session = i % 25 == 0;
            let user = if in_session {
                users[0].clone()
            } else {
                users[rng.random_range(1..users.len())].clone()
            };
            let backend = if in_session || rng.random_bool(0.15) {
                SESSION_BACKEND
            } else {
                BACKENDS[rng.random_range(0..2)]
            };
            let n_items = if rng.random_bool(0.3) { rng.random_range(2..4) } else { 1 };
            let items = (0..n_items)
                .map(|_| JobItem::new(BELL, rng.random_range(100..800)))
                .collect();
            let mut d = JobDescriptor::batch(user, backend, items).with_priority(rng.random_range(0..4));
            if n_items == 1 {
                d.kind = qruntime_core::scheduler::JobKind::Single;
            }
            if in_session {
                d.session_id = Some(session.clone());
            }
            (at, d)
        })
        .collect();
    arrivals.sort_by_key(|(t, _)| *t);
    let mut arrivals = arrivals.into_iter().peekable();

    let mut active: BTreeMap<String, Active> = BTreeMap::new();
    let mut now = t0;
    let deadline = t0 + TimeDelta::hours(12);
    loop {
        while arrivals.peek().is_some_and(|(t, _)| *t <= now) {
            let (_, d) = arrivals.next().unwrap();
            let user = d.user.clone();
            match s.submit(d, now) {
                Ok(id) => report.submitted.push(id),
                Err(e) if e.code() == "USER_LIMIT_EXCEEDED" => report.rejected_by_limit += 1,
                Err(e) => panic!("unexpected rejection: {e}"),
            }
            if s.state().active_jobs_of(&user) > USER_LIMIT {
                report.limit_violations.push(format!("{user} at {now}"));
            }
        }
        // occasional cancellation of a random unfinished job
        if rng.random_bool(0.01) {
            let open: Vec<String> = s
                .state()
                .jobs
                .values()
                .filter(|j| j.status.is_active() && j.descriptor.session_id.is_none())
                .map(|j| j.job_id.clone())
                .collect();
            if !open.is_empty() {
                let id = &open[rng.random_range(0..open.len())];
                s.cancel(id, now).unwrap();
            }
        }
        // finish or fail running attempts whose time is up
        let due: Vec<String> = active
            .iter()
            .filter(|(_, a)| a.end <= now)
            .map(|(id, _)| id.clone())
            .collect();
        for id in due {
            let a = active.remove(&id).unwrap();
            report.runs[a.run].end = now;
            let job = s.job(&id).unwrap().clone();
            if job.cancel_requested {
                s.acknowledge_cancel(&id, now).unwrap();
            } else if a.fails {
                s.fail_attempt(&id, "injected", now).unwrap();
            } else {
                s.complete(&id, Default::default(), now).unwrap();
            }
        }
        for w in ["w1", "w2"] {
            s.heartbeat(w, now).unwrap();
        }
        let eligible: BTreeMap<&str, _> = BACKENDS.iter().map(|b| (*b, eligible_now(&s, b, now))).collect();
        for a in s.assign(now).unwrap() {
            let rec = s.start(&a.job_id, &a.worker_id, now).unwrap().expect("assigned job starts");
            report.starts.push(StartObs {
                at: now,
                backend: a.backend_id.clone(),
                chosen: a.job_id.clone(),
                eligible: eligible[a.backend_id.as_str()].clone(),
            });
            let dur = TimeDelta::nanoseconds(rec.estimated_duration_ns as i64);
            let fails = rec.descriptor.session_id.is_none() && rng.random_bool(0.08);
            let end = if fails { now + dur / 2 } else { now + dur };
            report.runs.push(Run {
                job_id: a.job_id.clone(),
                backend: a.backend_id,
                user: rec.descriptor.user.clone(),
                session: rec.descriptor.session_id.clone(),
                start: now,
                end,
            });
            active.insert(
                a.job_id,
                Active {
                    end,
                    fails,
                    run: report.runs.len() - 1,
                },
            );
        }
        for u in &users {
            if s.state().active_jobs_of(u) > USER_LIMIT {
                report.limit_violations.push(format!("{u} at {now}"));
            }
        }
        let all_done = arrivals.peek().is_none() && s.state().jobs.values().all(|j| j.status.is_terminal());
        if all_done || now >= deadline {
            break;
        }
        now += TimeDelta::seconds(1);
    }

    report.unterminated = s
        .state()
        .jobs
        .values()
        .filter(|j| !j.status.is_terminal())
        .map(|j| j.job_id.clone())
        .collect();
    report.terminal = s.state().jobs.values().map(|j| (j.job_id.clone(), j.status)).collect();
    report.log_lines = s.log().lines().unwrap();

    // Re-fold the log, checking every status change against the legal table.
    let mut folded = qruntime_core::scheduler::SchedulerState::default();
    for e in s.log().events() {
        let before: BTreeMap<String, JobStatus> = folded.jobs.iter().map(|(k, j)| (k.clone(), j.status)).collect();
        folded.apply(e.seq, e.ts, &e.event);
        if let SchedulerEvent::JobSubmitted { record } = &e.event {
            if record.status != JobStatus::Queued {
                report.illegal_transitions.push(format!("{} submitted as {}", record.job_id, record.status));
            }
        }
        for (id, j) in &folded.jobs {
            if let Some(prev) = before.get(id) {
                if *prev != j.status && !legal(*prev, j.status) {
                    report.illegal_transitions.push(format!("{id}: {prev} -> {}", j.status));
                }
            }
        }
    }
    if folded.rejected_transitions > 0 {
        report
            .illegal_transitions
            .push(format!("{} refused transitions", folded.rejected_transitions));
    }
    report
}

/// The lifecycle table, spelled out independently of `JobStatus::can_become`.
fn legal(from: JobStatus, to: JobStatus) -> bool {
    use JobStatus::*;
    let table: &[(JobStatus, &[JobStatus])] = &[
        (Queued, &[Scheduled, Cancelled]),
        (Scheduled, &[Running, Queued, Cancelled]),
        (Running, &[Completed, Failed, Queued]),
    ];
    table.iter().any(|(f, tos)| *f == from && tos.contains(&to))
}

impl TraceReport {
    /// (a) Among eligible non-session jobs, the started one has the highest
    /// priority, then the earliest submission, then the smallest id.
    pub fn check_priority_order(&self) -> Result<(), String> {
        for s in &self.starts {
            if s.eligible.iter().any(|e| e.3.is_some()) {
                continue;
            }
            let best = s
                .eligible
                .iter()
                .min_by_key(|(p, t, id, _)| (Reverse(*p), *t, id.clone()))
                .map(|e| e.2.clone());
            if best.as_deref() != Some(s.chosen.as_str()) {
                return Err(format!("at {} on {} started {} but {:?} was first", s.at, s.backend, s.chosen, best));
            }
        }
        Ok(())
    }

    /// (b) No job runs inside another user's reservation window.
    pub fn check_reservation_exclusivity(&self) -> Result<(), String> {
        for r in &self.runs {
            for (backend, owner, start, end) in &self.reservations {
                if *backend == r.backend && *owner != r.user && r.start < *end && *start < r.end {
                    return Err(format!("{} ({}) ran {}..{} inside {owner}'s window", r.job_id, r.user, r.start, r.end));
                }
            }
        }
        Ok(())
    }

    /// (c) One job per backend at a time (so batch items are contiguous), and
    /// no foreign job starts between the first and last start of a session.
    pub fn check_contiguity(&self) -> Result<(), String> {
        let mut by_backend: BTreeMap<&str, Vec<&Run>> = BTreeMap::new();
        for r in &self.runs {
            by_backend.entry(&r.backend).or_default().push(r);
        }
        for (b, runs) in &by_backend {
            for w in runs.windows(2) {
                if w[1].start < w[0].end {
                    return Err(format!("{} and {} overlap on {b}", w[0].job_id, w[1].job_id));
                }
            }
            let session_idx: Vec<usize> = runs
                .iter()
                .enumerate()
                .filter(|(_, r)| r.session.is_some())
                .map(|(i, _)| i)
                .collect();
            if let (Some(&first), Some(&last)) = (session_idx.first(), session_idx.last()) {
                // contiguity is owed only while session work was waiting
                for (i, r) in runs.iter().enumerate().take(last).skip(first) {
                    if r.session.is_none() {
                        let waiting = self.starts.iter().any(|s| {
                            s.chosen == r.job_id && s.at == r.start && s.eligible.iter().any(|e| e.3.is_some())
                        });
                        if waiting {
                            return Err(format!("{} (run {i}) interleaved a session on {b}", r.job_id));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// (d) Active jobs per user never exceed the limit.
    pub fn check_user_limit(&self) -> Result<(), String> {
        match self.limit_violations.first() {
            None => Ok(()),
            Some(v) => Err(format!("limit exceeded: {v}")),
        }
    }

    /// (e) Every submitted job ends in exactly one terminal state, via legal transitions only.
    pub fn check_termination(&self) -> Result<(), String> {
        if !self.unterminated.is_empty() {
            return Err(format!("{} jobs never terminated", self.unterminated.len()));
        }
        if let Some(t) = self.illegal_transitions.first() {
            return Err(format!("illegal transition {t}"));
        }
        if self.submitted.len() != self.terminal.len() {
            return Err("job count mismatch".into());
        }
        Ok(())
    }
}
