use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::backend::Counts;
use crate::circuit::{parse, Circuit, ParamBinding};
use crate::pipeline::{ExpectationResult, Observable, StageSpec};

pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_RESERVATION: TimeDelta = TimeDelta::minutes(15);
pub const DEFAULT_SESSION_TTL: TimeDelta = TimeDelta::minutes(10);

fn default_max_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Single,
    Batch,
    Hybrid,
}

/// One circuit to run, with its pipeline and observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobItem {
    /// Circuit in the OpenQASM subset.
    pub circuit: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub execution_options: Vec<StageSpec>,
    pub shots: u64,
    #[serde(default)]
    pub observable: Observable,
    /// Fixed values for symbolic parameters (single and batch jobs).
    #[serde(default, skip_serializing_if = "ParamBinding::is_empty")]
    pub parameters: ParamBinding,
}

impl JobItem {
    pub fn new(circuit: impl Into<String>, shots: u64) -> Self {
        JobItem {
            circuit: circuit.into(),
            execution_options: Vec::new(),
            shots,
            observable: Observable::default(),
            parameters: ParamBinding::default(),
        }
    }

    pub fn with_stage(mut self, stage: StageSpec) -> Self {
        self.execution_options.push(stage);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpsaConfig {
    pub a: f64,
    pub c: f64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        SpsaConfig { a: 0.5, c: 0.2 }
    }
}

/// Optimizer loop over the single parametric item, minimizing its expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridConfig {
    pub initial_params: BTreeMap<String, f64>,
    pub iterations: u32,
    #[serde(default)]
    pub spsa: SpsaConfig,
    /// Seeds the perturbation sequence.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDescriptor {
    /// Filled in from the authenticated identity by the service.
    #[serde(default)]
    pub user: String,
    pub kind: JobKind,
    /// A backend id, or `auto` to let the scheduler pick by estimated fidelity.
    pub backend_name: String,
    pub items: Vec<JobItem>,
    /// Larger is more urgent.
    #[serde(default)]
    pub priority: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<HybridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    /// Base seed for shot sampling.
    #[serde(default)]
    pub seed: u64,
}

impl JobDescriptor {
    pub fn single(user: impl Into<String>, backend: impl Into<String>, item: JobItem) -> Self {
        JobDescriptor {
            user: user.into(),
            kind: JobKind::Single,
            backend_name: backend.into(),
            items: vec![item],
            priority: 0,
            session_id: None,
            max_retries: DEFAULT_MAX_RETRIES,
            hybrid: None,
            idempotency_key: None,
            seed: 0,
        }
    }

    pub fn batch(user: impl Into<String>, backend: impl Into<String>, items: Vec<JobItem>) -> Self {
        JobDescriptor {
            kind: JobKind::Batch,
            items,
            ..Self::single(user, backend, JobItem::new("", 1))
        }
    }

    pub fn hybrid(user: impl Into<String>, backend: impl Into<String>, item: JobItem, config: HybridConfig) -> Self {
        JobDescriptor {
            kind: JobKind::Hybrid,
            hybrid: Some(config),
            ..Self::single(user, backend, item)
        }
    }

    pub fn with_priority(mut self, priority: i64) -> Self {
        self.priority = priority;
        self
    }

    /// Structural checks that need no platform state. Returns the parsed circuits.
    pub fn validate(&self) -> Result<Vec<Circuit>, String> {
        if self.items.is_empty() {
            return Err("items must not be empty".into());
        }
        if self.kind == JobKind::Single && self.items.len() != 1 {
            return Err("a single job has exactly one item".into());
        }
        let mut circuits = Vec::with_capacity(self.items.len());
        for (i, item) in self.items.iter().enumerate() {
            if item.shots == 0 {
                return Err(format!("items[{i}].shots must be at least 1"));
            }
            let c = parse(&item.circuit).map_err(|e| format!("items[{i}].circuit: {e}"))?;
            if c.measurements().is_empty() {
                return Err(format!("items[{i}].circuit measures nothing"));
            }
            circuits.push(c);
        }
        match (self.kind, &self.hybrid) {
            (JobKind::Hybrid, None) => return Err("hybrid jobs need a `hybrid` section".into()),
            (JobKind::Hybrid, Some(h)) => {
                if self.items.len() != 1 || circuits[0].symbols.is_empty() {
                    return Err("hybrid jobs take exactly one parametric item".into());
                }
                let missing: Vec<&String> = circuits[0]
                    .symbols
                    .iter()
                    .filter(|s| !h.initial_params.contains_key(*s) && !self.items[0].parameters.values.contains_key(*s))
                    .collect();
                if !missing.is_empty() {
                    return Err(format!("hybrid.initial_params misses {missing:?}"));
                }
                if !(h.spsa.a > 0.0 && h.spsa.c > 0.0) {
                    return Err("spsa gains must be positive".into());
                }
            }
            (_, Some(_)) => return Err("`hybrid` is only valid for hybrid jobs".into()),
            (_, None) => {
                for (i, (c, item)) in circuits.iter().zip(&self.items).enumerate() {
                    if let Some(s) = c.symbols.iter().find(|s| !item.parameters.values.contains_key(*s)) {
                        return Err(format!("items[{i}]: parameter `{s}` has no value"));
                    }
                }
            }
        }
        Ok(circuits)
    }

    pub fn required_stages(&self) -> BTreeSet<String> {
        self.items
            .iter()
            .flat_map(|i| i.execution_options.iter().map(|s| s.name.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Queued,
    Scheduled,
    Running,
    Completed,
    Failed,
    Cancelled,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Completed | JobStatus::Failed | JobStatus::Cancelled)
    }

    pub fn is_active(self) -> bool {
        !self.is_terminal()
    }

    pub fn can_become(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, next),
            (Queued, Scheduled | Cancelled)
                | (Scheduled, Running | Queued | Cancelled)
                | (Running, Completed | Failed | Queued)
        )
    }
}

impl std::fmt::Display for JobStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

/// One optimizer step as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub value_plus: f64,
    pub value_minus: f64,
    /// Parameters after the update.
    pub params: BTreeMap<String, f64>,
}

/// Optimizer state after a completed iteration; enough to resume bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Iterations completed so far.
    pub iteration: u32,
    pub params: BTreeMap<String, f64>,
    pub best_params: BTreeMap<String, f64>,
    pub best_value: Option<f64>,
    pub rng_seed: u64,
    pub rng_word_pos: u64,
    pub trace: Vec<IterationRecord>,
    /// Late bindings performed so far, across restarts.
    #[serde(default)]
    pub bindings: u64,
    /// Template compilations so far (first compile plus recompiles), across restarts.
    #[serde(default)]
    pub compiles: u32,
    #[serde(default)]
    pub recompiles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub index: usize,
    pub backend_id: String,
    /// Raw counts of the unmodified circuit (first variant).
    pub counts: Counts,
    pub expectation: ExpectationResult,
    pub calibration_ts: DateTime<Utc>,
    pub template_id: String,
    pub executions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub best_params: BTreeMap<String, f64>,
    pub best_value: f64,
    pub final_params: BTreeMap<String, f64>,
    pub iterations: u32,
    pub trace: Vec<IterationRecord>,
    pub bindings: u64,
    pub compile_count: u32,
    pub recompiles: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JobResults {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<ItemResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<HybridResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Progress {
    pub completed: u32,
    pub total: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub descriptor: JobDescriptor,
    /// Resolved target (differs from `backend_name` when that was `auto`).
    pub backend_id: String,
    pub status: JobStatus,
    pub attempts: u32,
    pub submitted_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    /// Earliest next start after a failed attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_before: Option<DateTime<Utc>>,
    pub required_stages: BTreeSet<String>,
    pub estimated_duration_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<Checkpoint>,
    /// Results of finished items of a batch still in progress.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partial: Vec<ItemResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<JobResults>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub cancel_requested: bool,
}

impl JobRecord {
    pub fn progress(&self) -> Progress {
        match (&self.descriptor.hybrid, self.descriptor.kind) {
            (Some(h), JobKind::Hybrid) => Progress {
                completed: match (&self.results, &self.checkpoint) {
                    (Some(_), _) => h.iterations,
                    (None, Some(c)) => c.iteration,
                    (None, None) => 0,
                },
                total: h.iterations,
            },
            _ => Progress {
                completed: self
                    .results
                    .as_ref()
                    .map_or(self.partial.len(), |r| r.items.len()) as u32,
                total: self.descriptor.items.len() as u32,
            },
        }
    }

    pub fn estimated_duration(&self) -> TimeDelta {
        TimeDelta::nanoseconds(self.estimated_duration_ns.min(i64::MAX as u64) as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerInfo {
    pub worker_id: String,
    pub stages: BTreeSet<String>,
    /// Backends this worker drives; empty means all.
    #[serde(default)]
    pub backends: BTreeSet<String>,
    pub max_parallel: u32,
    pub last_heartbeat: DateTime<Utc>,
    #[serde(default)]
    pub expired: bool,
}

impl WorkerInfo {
    pub fn new(worker_id: impl Into<String>, stages: impl IntoIterator<Item = impl Into<String>>) -> Self {
        WorkerInfo {
            worker_id: worker_id.into(),
            stages: stages.into_iter().map(Into::into).collect(),
            backends: BTreeSet::new(),
            max_parallel: 1,
            last_heartbeat: DateTime::<Utc>::MIN_UTC,
            expired: false,
        }
    }

    pub fn serves(&self, backend_id: &str) -> bool {
        self.backends.is_empty() || self.backends.contains(backend_id)
    }

    pub fn is_live(&self, now: DateTime<Utc>, ttl: TimeDelta) -> bool {
        !self.expired && now - self.last_heartbeat <= ttl
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservationStatus {
    Active,
    Cancelled,
}

/// Exclusive use of one backend over `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub reservation_id: String,
    pub backend_id: String,
    pub user: String,
    pub start: DateTime<Utc>,
    pub duration_secs: i64,
    pub status: ReservationStatus,
}

impl Reservation {
    pub fn end(&self) -> DateTime<Utc> {
        self.start + TimeDelta::seconds(self.duration_secs)
    }

    /// Half-open overlap with `[from, to)`.
    pub fn overlaps(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> bool {
        self.status == ReservationStatus::Active && self.start < to && from < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub user: String,
    pub backend_id: String,
    pub ttl_secs: i64,
    pub opened_at: DateTime<Utc>,
    pub last_activity: DateTime<Utc>,
    pub open: bool,
}

impl Session {
    /// Open and not idle for longer than its TTL.
    pub fn is_active(&self, now: DateTime<Utc>) -> bool {
        self.open && now - self.last_activity <= TimeDelta::seconds(self.ttl_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legal_transitions() {
        use JobStatus::*;
        let all = [Queued, Scheduled, Running, Completed, Failed, Cancelled];
        let legal: Vec<(JobStatus, JobStatus)> = all
            .iter()
            .flat_map(|&a| all.iter().map(move |&b| (a, b)))
            .filter(|(a, b)| a.can_become(*b))
            .collect();
        assert_eq!(
            legal,
            vec![
                (Queued, Scheduled),
                (Queued, Cancelled),
                (Scheduled, Queued),
                (Scheduled, Running),
                (Scheduled, Cancelled),
                (Running, Queued),
                (Running, Completed),
                (Running, Failed),
            ]
        );
    }

    #[test]
    fn descriptor_wire_form() {
        let json = r#"{
            "kind": "single",
            "backend_name": "sim-linear-5",
            "items": [{"circuit": "qreg q[1]; creg c[1]; h q[0]; measure q[0] -> c[0];",
                       "shots": 100,
                       "execution_options": ["ErrorMitigatedExecutionBackend", {"name": "zne", "config": {"scales": [1, 3]}}]}]
        }"#;
        let d: JobDescriptor = serde_json::from_str(json).unwrap();
        assert_eq!(d.max_retries, 3);
        assert_eq!(d.items[0].execution_options[1].config["scales"], serde_json::json!([1, 3]));
        assert!(d.validate().is_ok());
        let bad = json.replacen("\"kind\"", "\"colour\": 1, \"kind\"", 1);
        assert!(serde_json::from_str::<JobDescriptor>(&bad).unwrap_err().to_string().contains("unknown field"));
    }

    #[test]
    fn descriptor_checks() {
        let item = JobItem::new("qreg q[1]; creg c[1]; h q[0]; measure q[0] -> c[0];", 10);
        let mut d = JobDescriptor::single("u", "b", item.clone());
        d.items[0].shots = 0;
        assert!(d.validate().is_err());
        let d = JobDescriptor::batch("u", "b", vec![]);
        assert!(d.validate().is_err());
        let h = HybridConfig {
            initial_params: BTreeMap::new(),
            iterations: 3,
            spsa: SpsaConfig::default(),
            seed: 0,
        };
        assert!(JobDescriptor::hybrid("u", "b", item, h.clone()).validate().is_err());
        let p = JobItem::new("input float a; qreg q[1]; creg c[1]; ry(a) q[0]; measure q[0] -> c[0];", 10);
        assert!(JobDescriptor::hybrid("u", "b", p.clone(), h).validate().is_err());
        assert!(JobDescriptor::single("u", "b", p).validate().is_err());
    }

    #[test]
    fn half_open_reservations() {
        let t0 = crate::clock::epoch();
        let r = Reservation {
            reservation_id: "r".into(),
            backend_id: "b".into(),
            user: "u".into(),
            start: t0,
            duration_secs: 900,
            status: ReservationStatus::Active,
        };
        assert!(!r.overlaps(r.end(), r.end() + TimeDelta::minutes(5)));
        assert!(!r.overlaps(t0 - TimeDelta::minutes(5), t0));
        assert!(r.overlaps(r.end() - TimeDelta::seconds(1), r.end()));
    }
}
