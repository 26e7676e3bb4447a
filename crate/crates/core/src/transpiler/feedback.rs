use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::ExecutablePayload;

/// EWMA weight of a new observation.
pub const FEEDBACK_ALPHA: f64 = 0.2;

const FIDELITY_LOG_LEN: usize = 64;

/// Measured outcome of one execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub duration_ns: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendFeedback {
    /// observed / predicted duration, smoothed.
    pub ratio: f64,
    pub samples: u64,
    /// (estimated fidelity, observed success proxy) pairs, newest last.
    pub fidelity_log: VecDeque<(f64, f64)>,
}

impl Default for BackendFeedback {
    fn default() -> Self {
        BackendFeedback {
            ratio: 1.0,
            samples: 0,
            fidelity_log: VecDeque::new(),
        }
    }
}

/// Per-backend correction of the analytic duration model.
#[derive(Debug, Default)]
pub struct DurationModel {
    backends: Mutex<BTreeMap<String, BackendFeedback>>,
}

impl DurationModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_state(state: BTreeMap<String, BackendFeedback>) -> Self {
        DurationModel {
            backends: Mutex::new(state),
        }
    }

    pub fn state(&self) -> BTreeMap<String, BackendFeedback> {
        self.backends.lock().unwrap().clone()
    }

    pub fn ratio(&self, backend_id: &str) -> f64 {
        self.backends
            .lock()
            .unwrap()
            .get(backend_id)
            .map_or(1.0, |b| b.ratio)
    }

    /// Applies the learned correction to a raw estimate.
    pub fn adjust(&self, backend_id: &str, raw_ns: f64) -> f64 {
        raw_ns * self.ratio(backend_id)
    }

    /// Folds one observation in and returns the corrected estimate for `predicted_ns`.
    pub fn observe(
        &self,
        backend_id: &str,
        predicted_ns: u64,
        observed: Observation,
        estimated_fidelity: f64,
    ) -> f64 {
        let mut map = self.backends.lock().unwrap();
        let entry = map.entry(backend_id.to_string()).or_default();
        if predicted_ns > 0 {
            let sample = observed.duration_ns as f64 / predicted_ns as f64;
            entry.ratio = (1.0 - FEEDBACK_ALPHA) * entry.ratio + FEEDBACK_ALPHA * sample;
        }
        entry.samples += 1;
        entry.fidelity_log.push_back((estimated_fidelity, observed.success_rate));
        while entry.fidelity_log.len() > FIDELITY_LOG_LEN {
            entry.fidelity_log.pop_front();
        }
        tracing::debug!(
            backend = backend_id,
            ratio = entry.ratio,
            estimated_fidelity,
            observed_success = observed.success_rate,
            "execution feedback"
        );
        predicted_ns as f64 * entry.ratio
    }

    /// Overwrites the smoothed ratio of one backend (used during replay).
    pub fn restore(&self, backend_id: &str, feedback: BackendFeedback) {
        self.backends.lock().unwrap().insert(backend_id.to_string(), feedback);
    }
}

/// Records the outcome of an executed payload; returns the updated duration estimate in ns.
pub fn record_feedback(model: &DurationModel, payload: &ExecutablePayload, observed: Observation) -> f64 {
    model.observe(
        &payload.backend_id,
        payload.estimated_duration_ns,
        observed,
        payload.estimated_fidelity,
    )
}
