use std::collections::BTreeMap;

use crate::backend::Counts;
use crate::circuit::{Circuit, Gate, Instruction};

use super::{ChainContext, Distribution, Evaluation, PipelineError, Stage, StageSpec};

pub const READOUT_STAGE: &str = "readout_mitigation";

const SINGULAR_TOL: f64 = 1e-9;

/// Tensored inverse of per-clbit 2×2 confusion matrices.
///
/// For clbit `i`, `e0 = P(read 1 | prepared 0)` and `e1 = P(read 0 | prepared 1)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReadoutMitigator {
    errors: BTreeMap<usize, (f64, f64)>,
}

impl ReadoutMitigator {
    pub fn new(errors: BTreeMap<usize, (f64, f64)>) -> Result<Self, PipelineError> {
        for (&bit, &(e0, e1)) in &errors {
            if 1.0 - e0 - e1 <= SINGULAR_TOL {
                return Err(PipelineError::SingularConfusion(bit));
            }
        }
        Ok(ReadoutMitigator { errors })
    }

    /// Same symmetric flip probability on every listed clbit.
    pub fn symmetric(clbits: impl IntoIterator<Item = usize>, flip: f64) -> Result<Self, PipelineError> {
        Self::new(clbits.into_iter().map(|b| (b, (flip, flip))).collect())
    }

    /// Estimates confusion from runs that prepared all-zeros and all-ones.
    pub fn calibrate(zeros: &Counts, ones: &Counts, clbits: &[usize]) -> Result<Self, PipelineError> {
        let rate = |counts: &Counts, bit: usize, want: bool| {
            let hits: u64 = counts
                .counts
                .iter()
                .filter(|(b, _)| Counts::bit(b, bit) == want)
                .map(|(_, n)| n)
                .sum();
            hits as f64 / counts.shots.max(1) as f64
        };
        Self::new(
            clbits
                .iter()
                .map(|&b| (b, (rate(zeros, b, true), rate(ones, b, false))))
                .collect(),
        )
    }

    pub fn errors(&self) -> &BTreeMap<usize, (f64, f64)> {
        &self.errors
    }

    /// Applies the inverse to a dense probability vector indexed by clbit value.
    pub fn apply_probabilities(&self, probs: &[f64]) -> Vec<f64> {
        let mut p = probs.to_vec();
        for (&bit, &(e0, e1)) in &self.errors {
            let mask = 1usize << bit;
            if mask >= p.len() {
                continue;
            }
            let det = 1.0 - e0 - e1;
            for i in 0..p.len() {
                if i & mask != 0 {
                    continue;
                }
                let (p0, p1) = (p[i], p[i | mask]);
                p[i] = ((1.0 - e1) * p0 - e1 * p1) / det;
                p[i | mask] = (-e0 * p0 + (1.0 - e0) * p1) / det;
            }
        }
        p
    }

    pub fn mitigate(&self, counts: &Counts) -> Distribution {
        let width = counts.counts.keys().map(String::len).max().unwrap_or(0);
        let shots = counts.shots.max(1) as f64;
        let mut dense = vec![0.0; 1 << width];
        for (b, &n) in &counts.counts {
            dense[usize::from_str_radix(b, 2).unwrap_or(0)] += n as f64 / shots;
        }
        let corrected = self.apply_probabilities(&dense);
        let probabilities = corrected
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p != 0.0)
            .map(|(i, p)| (Counts::to_bitstring(i, width), p))
            .collect();
        let variance_gain = self
            .errors
            .values()
            .map(|(e0, e1)| (1.0 - e0 - e1).powi(-2))
            .product();
        Distribution {
            probabilities,
            shots: counts.shots,
            variance_gain,
        }
    }
}

/// Pipeline stage wrapping [`ReadoutMitigator`].
///
/// With `readout_error` in the config the stated flip probability is used
/// directly; otherwise two calibration circuits (all-zeros, all-ones) are
/// appended to the variant set and the confusion is estimated from them.
#[derive(Debug, Clone, Default)]
pub struct ReadoutMitigation {
    known: Option<KnownError>,
    pending: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum KnownError {
    Uniform(f64),
    PerClbit(Vec<f64>),
}

impl ReadoutMitigation {
    pub fn calibrating() -> Self {
        Self::default()
    }

    pub fn with_known_error(flip: f64) -> Self {
        ReadoutMitigation {
            known: Some(KnownError::Uniform(flip)),
            pending: None,
        }
    }

    pub fn from_spec(spec: &StageSpec) -> Result<Self, PipelineError> {
        let invalid = |message: String| PipelineError::InvalidConfig {
            stage: spec.name.clone(),
            message,
        };
        let known = match spec.config.get("readout_error") {
            None => None,
            Some(serde_json::Value::Number(n)) => Some(KnownError::Uniform(
                n.as_f64().ok_or_else(|| invalid("readout_error must be a number".into()))?,
            )),
            Some(v) => Some(KnownError::PerClbit(
                serde_json::from_value(v.clone()).map_err(|e| invalid(e.to_string()))?,
            )),
        };
        if let Some(k) = &known {
            let vals = match k {
                KnownError::Uniform(f) => vec![*f],
                KnownError::PerClbit(v) => v.clone(),
            };
            if vals.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(invalid("readout_error must lie in [0, 1]".into()));
            }
        }
        Ok(ReadoutMitigation { known, pending: None })
    }

    fn calibration_circuits(template: &Circuit) -> [Circuit; 2] {
        let build = |flip: bool| {
            let mut c = Circuit::new(template.num_qubits, template.num_clbits);
            for (q, b) in template.measurements() {
                if flip {
                    c.instructions.push(Instruction::new(Gate::X, vec![q]));
                }
                c.instructions.push(Instruction::measure(q, b));
            }
            c
        };
        [build(false), build(true)]
    }
}

impl Stage for ReadoutMitigation {
    fn name(&self) -> &str {
        READOUT_STAGE
    }

    fn pre(&mut self, mut circuits: Vec<Circuit>, _ctx: &ChainContext) -> Result<Vec<Circuit>, PipelineError> {
        let clbits: Vec<usize> = circuits
            .first()
            .map(|c| c.measurements().into_iter().map(|(_, b)| b).collect())
            .unwrap_or_default();
        if let Some(known) = &self.known {
            let errors = match known {
                KnownError::Uniform(f) => clbits.iter().map(|&b| (b, (*f, *f))).collect(),
                KnownError::PerClbit(v) => v.iter().enumerate().map(|(b, &f)| (b, (f, f))).collect(),
            };
            ReadoutMitigator::new(errors)?;
            self.pending = Some(clbits);
            return Ok(circuits);
        }
        if let Some(first) = circuits.first() {
            let cal = Self::calibration_circuits(first);
            circuits.extend(cal);
        }
        self.pending = Some(clbits);
        Ok(circuits)
    }

    fn post(&mut self, mut results: Vec<Evaluation>, _ctx: &ChainContext) -> Result<Vec<Evaluation>, PipelineError> {
        let clbits = self.pending.take().unwrap_or_default();
        let mitigator = match &self.known {
            Some(KnownError::Uniform(f)) => ReadoutMitigator::symmetric(clbits, *f)?,
            Some(KnownError::PerClbit(v)) => ReadoutMitigator::new(v.iter().enumerate().map(|(b, &f)| (b, (f, f))).collect())?,
            None => {
                if results.len() < 2 {
                    return Err(PipelineError::ArityMismatch(READOUT_STAGE.into()));
                }
                let ones = results.pop().unwrap();
                let zeros = results.pop().unwrap();
                match (zeros, ones) {
                    (Evaluation::Counts(z), Evaluation::Counts(o)) => ReadoutMitigator::calibrate(&z, &o, &clbits)?,
                    (other, _) => {
                        return Err(PipelineError::UnexpectedInput {
                            stage: READOUT_STAGE.into(),
                            got: other.kind(),
                        })
                    }
                }
            }
        };
        results
            .into_iter()
            .map(|e| match e {
                Evaluation::Counts(c) => Ok(Evaluation::Distribution(mitigator.mitigate(&c))),
                other => Err(PipelineError::UnexpectedInput {
                    stage: READOUT_STAGE.into(),
                    got: other.kind(),
                }),
            })
            .collect()
    }
}
