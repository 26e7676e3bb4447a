//! Pure scheduling decisions over a [`SchedulerState`].

use std::cmp::Reverse;
use std::collections::BTreeMap;

use chrono::{DateTime, TimeDelta, Utc};

use crate::calibration::CalibrationSnapshot;
use crate::circuit::Circuit;
use crate::transpiler::{compile_template, decompose, estimate_duration_ns, BackendCapabilities, BackendFeedback};

use super::state::SchedulerState;
use super::types::{JobDescriptor, JobKind, JobRecord, JobStatus, WorkerInfo};

/// Fixed per-item overhead of the default resource model.
pub const ITEM_OVERHEAD_NS: u64 = 10_000;
pub const BACKOFF_CAP_SECS: i64 = 60;

/// Delay before retry number `attempts`: `min(2^attempts, 60)` seconds.
pub fn backoff(attempts: u32) -> TimeDelta {
    let secs = if attempts >= 6 { BACKOFF_CAP_SECS } else { (1i64 << attempts).min(BACKOFF_CAP_SECS) };
    TimeDelta::seconds(secs)
}

/// Plug-in point for job duration estimates.
pub trait ResourceEstimator: Send + Sync {
    /// Wall-clock estimate for one execution of `circuit`, in ns.
    fn estimate(&self, circuit: &Circuit, shots: u64, caps: &BackendCapabilities) -> u64;

    /// Estimate of a whole job: every item, times stage overhead and optimizer evaluations.
    fn estimate_job(
        &self,
        descriptor: &JobDescriptor,
        circuits: &[Circuit],
        caps: &BackendCapabilities,
        stage_cost: &dyn Fn(usize) -> f64,
        feedback: Option<&BackendFeedback>,
    ) -> u64 {
        let evaluations = match (&descriptor.kind, &descriptor.hybrid) {
            (JobKind::Hybrid, Some(h)) => (2 * h.iterations as u64).max(1),
            _ => 1,
        };
        let raw: f64 = circuits
            .iter()
            .zip(&descriptor.items)
            .enumerate()
            .map(|(i, (c, item))| self.estimate(c, item.shots, caps) as f64 * stage_cost(i))
            .sum();
        let ratio = feedback.map_or(1.0, |f| f.ratio);
        (raw * evaluations as f64 * ratio).round() as u64
    }
}

/// `shots × (Σ gate durations + readout) + 10 µs`, on the basis-decomposed circuit.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultEstimator;

impl ResourceEstimator for DefaultEstimator {
    fn estimate(&self, circuit: &Circuit, shots: u64, caps: &BackendCapabilities) -> u64 {
        let per_shot = match decompose(circuit, &caps.basis_gates) {
            Ok(d) => estimate_duration_ns(&d, caps),
            Err(_) => estimate_duration_ns(circuit, caps),
        };
        shots.saturating_mul(per_shot).saturating_add(ITEM_OVERHEAD_NS)
    }
}

/// Placement of one queued job on a worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub job_id: String,
    pub worker_id: String,
    pub backend_id: String,
}

/// Tunables of the decision function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub worker_ttl: TimeDelta,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            worker_ttl: TimeDelta::seconds(30),
        }
    }
}

/// Ordering key: session affinity, then priority (descending), then
/// submission time, then job id.
pub type QueueKey = (u8, Reverse<i64>, DateTime<Utc>, String);

pub fn queue_key(state: &SchedulerState, job: &JobRecord, now: DateTime<Utc>) -> QueueKey {
    let session = job
        .descriptor
        .session_id
        .as_ref()
        .and_then(|id| state.sessions.get(id))
        .filter(|s| s.is_active(now));
    let affinity = match session {
        Some(s) if state.last_session.get(&job.backend_id) == Some(&s.session_id) => 0,
        Some(_) => 1,
        None => 2,
    };
    (affinity, Reverse(job.descriptor.priority), job.submitted_at, job.job_id.clone())
}

/// True when another user's active reservation overlaps `[start, start + duration)`.
pub fn blocked_by_reservation(
    state: &SchedulerState,
    job: &JobRecord,
    start: DateTime<Utc>,
    duration: TimeDelta,
) -> bool {
    let end = start + duration.max(TimeDelta::nanoseconds(1));
    state
        .active_reservations(&job.backend_id)
        .any(|r| r.user != job.descriptor.user && r.overlaps(start, end))
}

fn worker_fits(w: &WorkerInfo, job: &JobRecord, now: DateTime<Utc>, policy: &Policy) -> bool {
    w.is_live(now, policy.worker_ttl) && w.serves(&job.backend_id) && job.required_stages.is_subset(&w.stages)
}

/// Queued jobs of one backend that could start at `now`, in queue order.
pub fn eligible_queue<'a>(
    state: &'a SchedulerState,
    backend_id: &str,
    now: DateTime<Utc>,
) -> Vec<(QueueKey, &'a JobRecord)> {
    let mut q: Vec<_> = state
        .jobs
        .values()
        .filter(|j| j.backend_id == backend_id && j.status == JobStatus::Queued && !j.cancel_requested)
        .filter(|j| j.not_before.is_none_or(|t| t <= now))
        .filter(|j| !blocked_by_reservation(state, j, now, j.estimated_duration()))
        .map(|j| (queue_key(state, j, now), j))
        .collect();
    q.sort_by(|a, b| a.0.cmp(&b.0));
    q
}

/// One round of placement decisions. Pure: reads the state, returns what to do.
///
/// Each backend runs at most one job at a time; a batch or hybrid job keeps
/// its backend until every item or iteration is done. Among jobs that can
/// start now and have a live, capable worker with spare capacity, the
/// smallest [`queue_key`] wins; workers are picked by (load, id).
pub fn next_decision(state: &SchedulerState, now: DateTime<Utc>, policy: &Policy) -> Vec<Assignment> {
    let mut load: BTreeMap<String, u32> = state
        .worker_load()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let mut backends: Vec<&str> = state
        .jobs
        .values()
        .filter(|j| j.status == JobStatus::Queued)
        .map(|j| j.backend_id.as_str())
        .collect();
    backends.sort_unstable();
    backends.dedup();

    let mut out = Vec::new();
    for backend in backends {
        if state.occupant(backend).is_some() {
            continue;
        }
        for (_, job) in eligible_queue(state, backend, now) {
            let worker = state
                .workers
                .values()
                .filter(|w| worker_fits(w, job, now, policy))
                .filter(|w| load.get(&w.worker_id).copied().unwrap_or(0) < w.max_parallel)
                .min_by_key(|w| (load.get(&w.worker_id).copied().unwrap_or(0), w.worker_id.clone()));
            if let Some(w) = worker {
                *load.entry(w.worker_id.clone()).or_insert(0) += 1;
                out.push(Assignment {
                    job_id: job.job_id.clone(),
                    worker_id: w.worker_id.clone(),
                    backend_id: backend.to_string(),
                });
                break;
            }
        }
    }
    out
}

/// Expected wait until `job_id` starts.
///
/// Simulates the backend timeline from `now`: the occupant's remaining
/// estimate, then every job ahead in queue order, each pushed past backoff
/// delays and other users' reservation windows. `None` for unknown, running
/// or finished jobs.
pub fn eta(state: &SchedulerState, job_id: &str, now: DateTime<Utc>) -> Option<TimeDelta> {
    let target = state.jobs.get(job_id)?;
    match target.status {
        JobStatus::Scheduled => return Some(TimeDelta::zero()),
        JobStatus::Queued => {}
        _ => return None,
    }
    let backend = target.backend_id.as_str();
    let mut t = now;
    if let Some(occ) = state.occupant(backend) {
        let end = occ.started_at.unwrap_or(now) + occ.estimated_duration();
        t = t.max(end);
    }
    let mut queue: Vec<_> = state
        .jobs
        .values()
        .filter(|j| j.backend_id == backend && j.status == JobStatus::Queued && !j.cancel_requested)
        .map(|j| (queue_key(state, j, now), j))
        .collect();
    queue.sort_by(|a, b| a.0.cmp(&b.0));
    for (_, job) in queue {
        let start = earliest_start(state, job, t);
        if job.job_id == job_id {
            return Some(start - now);
        }
        t = start + job.estimated_duration();
    }
    None
}

fn earliest_start(state: &SchedulerState, job: &JobRecord, from: DateTime<Utc>) -> DateTime<Utc> {
    let mut s = job.not_before.map_or(from, |nb| nb.max(from));
    let d = job.estimated_duration();
    // Each pass moves past at least one window, so this terminates.
    for _ in 0..=state.reservations.len() {
        let end = s + d.max(TimeDelta::nanoseconds(1));
        let blocking = state
            .active_reservations(&job.backend_id)
            .filter(|r| r.user != job.descriptor.user && r.overlaps(s, end))
            .map(|r| r.end())
            .max();
        match blocking {
            Some(e) => s = e,
            None => break,
        }
    }
    s
}

/// Candidate backend for `auto` placement.
#[derive(Debug, Clone)]
pub struct BackendView<'a> {
    pub caps: &'a BackendCapabilities,
    pub calibration: Option<&'a CalibrationSnapshot>,
    pub eta: TimeDelta,
}

/// Picks the backend with the highest estimated fidelity (product over
/// items), then the shorter wait, then the smaller id.
pub fn select_backend(circuits: &[Circuit], fleet: &[BackendView<'_>]) -> Option<String> {
    let mut best: Option<(f64, TimeDelta, &str)> = None;
    for view in fleet {
        let Some(cal) = view.calibration else { continue };
        let mut fidelity = 1.0;
        let mut ok = true;
        for c in circuits {
            match compile_template(c, view.caps, cal) {
                Ok(t) => fidelity *= crate::transpiler::estimate_fidelity(&t.routed, cal),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let id = view.caps.backend_id.as_str();
        let better = match best {
            None => true,
            Some((f, e, b)) => {
                fidelity > f || (fidelity == f && (view.eta < e || (view.eta == e && id < b)))
            }
        };
        if better {
            best = Some((fidelity, view.eta, id));
        }
    }
    best.map(|(_, _, id)| id.to_string())
}
