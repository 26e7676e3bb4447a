use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSnapshot;

pub const EPS_MIN: f64 = 1e-5;
pub const EPS_MAX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// σ of the log-normal multiplicative step applied to gate errors.
    pub error_sigma: f64,
    /// Half-width of the relative T1/T2 random walk.
    pub coherence_walk: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            error_sigma: 0.05,
            coherence_walk: 0.02,
        }
    }
}

impl DriftConfig {
    pub fn frozen() -> Self {
        DriftConfig {
            error_sigma: 0.0,
            coherence_walk: 0.0,
        }
    }
}

fn mix(seed: u64, t: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Next calibration after one day-to-day recalibration step `t`.
///
/// Each non-zero gate error is multiplied by `exp(g)`, `g ~ N(0, σ)`, then
/// clamped to `[1e-5, 0.5]`; virtual (zero-error) gates stay exact. T1 and T2
/// move by at most ±`coherence_walk` relative, keeping `t2 ≤ 2·t1`.
/// Deterministic in `(seed, t)`; the timestamp is left to the caller.
pub fn drift_step(prev: &CalibrationSnapshot, cfg: &DriftConfig, seed: u64, t: u64) -> CalibrationSnapshot {
    let mut next = prev.clone();
    if cfg.error_sigma == 0.0 && cfg.coherence_walk == 0.0 {
        return next;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, t));
    if cfg.error_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.error_sigma).expect("finite sigma");
        for g in &mut next.gates {
            let step: f64 = normal.sample(&mut rng);
            if g.error_rate > 0.0 {
                g.error_rate = (g.error_rate * step.exp()).clamp(EPS_MIN, EPS_MAX);
            }
        }
    }
    if cfg.coherence_walk > 0.0 {
        for q in &mut next.qubits {
            let w = cfg.coherence_walk;
            q.t1_us *= 1.0 + rng.random_range(-w..=w);
            q.t2_us *= 1.0 + rng.random_range(-w..=w);
            q.t2_us = q.t2_us.min(2.0 * q.t1_us);
        }
    }
    next
}
