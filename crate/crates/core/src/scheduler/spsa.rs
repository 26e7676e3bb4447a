//! Simultaneous-perturbation stochastic approximation with resumable state.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::{Checkpoint, HybridConfig, IterationRecord, SpsaConfig};

const ALPHA: f64 = 0.602;
const GAMMA: f64 = 0.101;

/// Step and perturbation sizes of iteration `k` (0-based).
pub fn gains(cfg: &SpsaConfig, k: u32) -> (f64, f64) {
    let n = (k + 1) as f64;
    (cfg.a / n.powf(ALPHA), cfg.c / n.powf(GAMMA))
}

/// Which point of an iteration is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Probe {
    /// The starting point of a zero-iteration run.
    Initial,
    Plus,
    Minus,
}

impl Probe {
    pub fn index(self) -> u64 {
        match self {
            Probe::Initial => 0,
            Probe::Plus => 1,
            Probe::Minus => 2,
        }
    }
}

/// Whether the loop should go on after a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpsaOutcome {
    Finished(Checkpoint),
    /// Stopped early at the returned checkpoint.
    Interrupted(Checkpoint),
}

/// Fresh optimizer state for `cfg`.
pub fn initial_checkpoint(cfg: &HybridConfig) -> Checkpoint {
    Checkpoint {
        iteration: 0,
        params: cfg.initial_params.clone(),
        best_params: cfg.initial_params.clone(),
        best_value: None,
        rng_seed: cfg.seed,
        rng_word_pos: 0,
        trace: Vec::new(),
        bindings: 0,
        compiles: 0,
        recompiles: 0,
    }
}

fn restore_rng(cp: &Checkpoint) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cp.rng_seed);
    rng.set_word_pos(cp.rng_word_pos as u128);
    rng
}

/// Runs (or resumes) the SPSA loop, minimizing `evaluate`.
///
/// `checkpoint` is called after every completed iteration with the state
/// needed to continue bit-for-bit; returning [`Step::Stop`] ends the loop.
/// With zero iterations the initial point is evaluated once.
pub fn run_spsa<E>(
    cfg: &HybridConfig,
    resume: Option<Checkpoint>,
    mut evaluate: impl FnMut(&BTreeMap<String, f64>, u32, Probe) -> Result<f64, E>,
    mut checkpoint: impl FnMut(&Checkpoint) -> Result<Step, E>,
) -> Result<SpsaOutcome, E> {
    let mut cp = resume.unwrap_or_else(|| initial_checkpoint(cfg));
    if cfg.iterations == 0 {
        if cp.best_value.is_none() {
            let v = evaluate(&cp.params, 0, Probe::Initial)?;
            cp.best_value = Some(v);
            cp.best_params = cp.params.clone();
        }
        return Ok(SpsaOutcome::Finished(cp));
    }
    let mut rng = restore_rng(&cp);
    while cp.iteration < cfg.iterations {
        let k = cp.iteration;
        let (a_k, c_k) = gains(&cfg.spsa, k);
        let delta: BTreeMap<String, f64> = cp
            .params
            .keys()
            .map(|name| (name.clone(), if rng.random::<bool>() { 1.0 } else { -1.0 }))
            .collect();
        let shifted = |sign: f64| -> BTreeMap<String, f64> {
            cp.params
                .iter()
                .map(|(n, v)| (n.clone(), v + sign * c_k * delta[n]))
                .collect()
        };
        let (plus, minus) = (shifted(1.0), shifted(-1.0));
        let y_plus = evaluate(&plus, k, Probe::Plus)?;
        let y_minus = evaluate(&minus, k, Probe::Minus)?;
        for (y, p) in [(y_plus, &plus), (y_minus, &minus)] {
            if cp.best_value.is_none_or(|b| y < b) {
                cp.best_value = Some(y);
                cp.best_params = p.clone();
            }
        }
        let diff = (y_plus - y_minus) / (2.0 * c_k);
        for (name, v) in cp.params.iter_mut() {
            *v -= a_k * diff / delta[name];
        }
        cp.iteration += 1;
        cp.rng_word_pos = rng.get_word_pos() as u64;
        cp.trace.push(IterationRecord {
            iteration: k,
            value_plus: y_plus,
            value_minus: y_minus,
            params: cp.params.clone(),
        });
        if cp.iteration < cfg.iterations && checkpoint(&cp)? == Step::Stop {
            return Ok(SpsaOutcome::Interrupted(cp));
        }
    }
    Ok(SpsaOutcome::Finished(cp))
}
