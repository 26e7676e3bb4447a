use std::collections::BTreeMap;

use crate::circuit::Circuit;
use crate::transpiler::inverse;

use super::{ChainContext, Evaluation, ExpectationResult, PipelineError, Stage, StageSpec};

pub const ZNE_STAGE: &str = "zne";
pub const DEFAULT_SCALES: [u32; 3] = [1, 3, 5];

/// Global unitary folding: every gate `G` becomes `G (G† G)^((λ−1)/2)`.
///
/// Even scales are rounded down to the next odd value. Gates whose inverse
/// is not expressible (unbound rotations) are left unfolded.
pub fn zne_fold(circuit: &Circuit, scale: u32) -> Circuit {
    let k = (scale.max(1) - 1) / 2;
    if k == 0 {
        return circuit.clone();
    }
    let mut out = Circuit {
        instructions: Vec::with_capacity(circuit.instructions.len() * (2 * k as usize + 1)),
        ..circuit.clone()
    };
    for inst in &circuit.instructions {
        out.instructions.push(inst.clone());
        if !inst.gate.is_unitary() {
            continue;
        }
        if let Some(inv) = inverse(inst) {
            for _ in 0..k {
                out.instructions.extend(inv.iter().cloned());
                out.instructions.push(inst.clone());
            }
        }
    }
    out
}

/// Least-squares line through `(λ, value)` evaluated at λ = 0.
pub fn richardson_extrapolate(points: &[(f64, f64)]) -> Result<f64, PipelineError> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(PipelineError::DegenerateInput);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(PipelineError::DegenerateInput);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(my - slope * mx)
}

/// Zero-noise extrapolation over folded variants.
#[derive(Debug, Clone)]
pub struct ZeroNoiseExtrapolation {
    name: String,
    scales: Vec<u32>,
}

impl Default for ZeroNoiseExtrapolation {
    fn default() -> Self {
        ZeroNoiseExtrapolation {
            name: ZNE_STAGE.to_string(),
            scales: DEFAULT_SCALES.to_vec(),
        }
    }
}

impl ZeroNoiseExtrapolation {
    pub fn new(scales: Vec<u32>) -> Result<Self, PipelineError> {
        let invalid = |message: &str| PipelineError::InvalidConfig {
            stage: ZNE_STAGE.into(),
            message: message.into(),
        };
        if scales.iter().any(|s| s % 2 == 0) {
            return Err(invalid("scale factors must be odd"));
        }
        let mut distinct = scales.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(PipelineError::DegenerateInput);
        }
        Ok(ZeroNoiseExtrapolation {
            name: ZNE_STAGE.into(),
            scales,
        })
    }

    /// Reads an optional `scales` array from the stage config.
    pub fn from_spec(spec: &StageSpec) -> Result<Self, PipelineError> {
        match spec.config.get("scales") {
            None => Ok(Self::default()),
            Some(v) => {
                let scales: Vec<u32> = serde_json::from_value(v.clone()).map_err(|e| PipelineError::InvalidConfig {
                    stage: spec.name.clone(),
                    message: e.to_string(),
                })?;
                Self::new(scales)
            }
        }
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn scales(&self) -> &[u32] {
        &self.scales
    }
}

impl Stage for ZeroNoiseExtrapolation {
    fn name(&self) -> &str {
        &self.name
    }

    fn pre(&mut self, circuits: Vec<Circuit>, _ctx: &ChainContext) -> Result<Vec<Circuit>, PipelineError> {
        Ok(circuits
            .iter()
            .flat_map(|c| self.scales.iter().map(move |&s| zne_fold(c, s)))
            .collect())
    }

    fn post(&mut self, results: Vec<Evaluation>, ctx: &ChainContext) -> Result<Vec<Evaluation>, PipelineError> {
        if !results.len().is_multiple_of(self.scales.len()) {
            return Err(PipelineError::ArityMismatch(self.name.clone()));
        }
        results
            .chunks(self.scales.len())
            .map(|group| {
                let per: Vec<ExpectationResult> = group.iter().map(|e| e.to_expectation(&ctx.observable)).collect();
                let points: Vec<(f64, f64)> = self.scales.iter().zip(&per).map(|(&s, e)| (s as f64, e.value)).collect();
                let value = richardson_extrapolate(&points)?;
                // Variance of the intercept of an ordinary least-squares fit.
                let n = points.len() as f64;
                let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
                let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let variance = points
                    .iter()
                    .zip(&per)
                    .map(|(p, e)| (1.0 / n - mx * (p.0 - mx) / sxx).powi(2) * e.variance)
                    .sum();
                let mut metadata = BTreeMap::new();
                metadata.insert("scales".to_string(), points.iter().map(|p| p.0).collect());
                metadata.insert("values".to_string(), points.iter().map(|p| p.1).collect());
                Ok(Evaluation::Expectation(ExpectationResult {
                    value,
                    variance,
                    metadata,
                }))
            })
            .collect()
    }

    fn cost_factor(&self) -> f64 {
        self.scales.iter().map(|&s| s as f64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::simulate_statevector;
    use crate::circuit::parse;

    #[test]
    fn scale_one_is_identity() {
        let c = parse("qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;").unwrap();
        assert_eq!(zne_fold(&c, 1), c);
    }

    #[test]
    fn x_folds_to_xxx() {
        let c = parse("qreg q[1]; x q[0];").unwrap();
        assert_eq!(zne_fold(&c, 3), parse("qreg q[1]; x q[0]; x q[0]; x q[0];").unwrap());
    }

    #[test]
    fn measures_are_not_folded() {
        let c = parse("qreg q[1]; creg c[1]; h q[0]; measure q[0] -> c[0];").unwrap();
        let f = zne_fold(&c, 5);
        assert_eq!(f.gate_count(), 5);
        assert_eq!(f.measurements(), c.measurements());
    }

    #[test]
    fn folded_statevector_matches() {
        let c = parse("qreg q[3]; h q[0]; rx(0.3) q[1]; cx q[0],q[2]; s q[2]; t q[1]; sx q[0]; swap q[1],q[2]; cz q[0],q[1];")
            .unwrap();
        let a = simulate_statevector(&c).unwrap();
        for scale in [3, 5, 7] {
            let b = simulate_statevector(&zne_fold(&c, scale)).unwrap();
            // global phase from the sx inverse identity
            let phase = a.iter().zip(&b).find(|(x, _)| x.norm() > 1e-6).map(|(x, y)| y / x).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x * phase - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn richardson_examples() {
        let v = richardson_extrapolate(&[(1.0, 0.9), (3.0, 0.7), (5.0, 0.5)]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(richardson_extrapolate(&[(1.0, 0.4), (3.0, 0.4)]).unwrap(), 0.4);
        assert_eq!(richardson_extrapolate(&[(1.0, 0.4)]), Err(PipelineError::DegenerateInput));
        assert_eq!(
            richardson_extrapolate(&[(3.0, 0.4), (3.0, 0.2)]),
            Err(PipelineError::DegenerateInput)
        );
    }

    #[test]
    fn config_scales() {
        let spec = StageSpec::named(ZNE_STAGE).with("scales", serde_json::json!([1, 3]));
        assert_eq!(ZeroNoiseExtrapolation::from_spec(&spec).unwrap().scales(), &[1, 3]);
        let bad = StageSpec::named(ZNE_STAGE).with("scales", serde_json::json!([1, 2]));
        assert!(ZeroNoiseExtrapolation::from_spec(&bad).is_err());
    }
}
