//! Decorator-chain execution of pre/post-processing stages.
//!
//! A job item names an ordered list of stages (its execution options). The
//! leftmost stage is the outermost wrapper: its `pre` runs first and its
//! `post` runs last. Stages are registered server-side under a name and
//! instantiated fresh for every chain, so chains never share state.

mod readout;
mod zne;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Counts;
use crate::circuit::Circuit;

pub use readout::{ReadoutMitigation, ReadoutMitigator, READOUT_STAGE};
pub use zne::{richardson_extrapolate, zne_fold, ZeroNoiseExtrapolation, DEFAULT_SCALES, ZNE_STAGE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("invalid config for stage `{stage}`: {message}")]
    InvalidConfig { stage: String, message: String },
    #[error("extrapolation needs at least two distinct scale factors")]
    DegenerateInput,
    #[error("confusion matrix for clbit {0} is singular")]
    SingularConfusion(usize),
    #[error("stage `{stage}` cannot consume {got}")]
    UnexpectedInput { stage: String, got: &'static str },
    #[error("stage `{0}` received a result count that does not match its variants")]
    ArityMismatch(String),
    #[error("execution failed: {0}")]
    Execution(String),
}

/// A stage reference inside a job descriptor. On the wire either a bare
/// name or `{"name": ..., "config": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StageSpecRepr")]
pub struct StageSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub config: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StageSpecRepr {
    Name(String),
    Full(StageSpecFull),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StageSpecFull {
    name: String,
    #[serde(default)]
    config: serde_json::Map<String, serde_json::Value>,
}

impl From<StageSpecRepr> for StageSpec {
    fn from(r: StageSpecRepr) -> Self {
        match r {
            StageSpecRepr::Name(name) => StageSpec::named(name),
            StageSpecRepr::Full(f) => StageSpec {
                name: f.name,
                config: f.config,
            },
        }
    }
}

impl StageSpec {
    pub fn named(name: impl Into<String>) -> Self {
        StageSpec {
            name: name.into(),
            config: serde_json::Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: serde_json::Value) -> Self {
        self.config.insert(key.to_string(), value);
        self
    }
}

/// Z-parity observable over a set of classical bits (all bits when unset).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clbits: Option<Vec<usize>>,
}

impl Observable {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn on(clbits: Vec<usize>) -> Self {
        Observable { clbits: Some(clbits) }
    }

    fn selects(&self, bit: usize, width: usize) -> bool {
        match &self.clbits {
            Some(bits) => bits.contains(&bit),
            None => bit < width,
        }
    }

    /// (−1)^parity of the selected bits.
    pub fn sign(&self, bitstring: &str) -> f64 {
        let width = bitstring.len();
        let ones = (0..width)
            .filter(|&i| self.selects(i, width) && Counts::bit(bitstring, i))
            .count();
        if ones % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub value: f64,
    pub variance: f64,
    /// Stage-specific detail, e.g. scale factors and per-variant values.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Vec<f64>>,
}

/// ⟨Z…Z⟩ over all bits of a counts histogram.
pub fn expectation_z(counts: &Counts) -> f64 {
    expectation(counts, &Observable::all())
}

pub fn expectation(counts: &Counts, obs: &Observable) -> f64 {
    if counts.shots == 0 {
        return 0.0;
    }
    counts
        .counts
        .iter()
        .map(|(b, &n)| obs.sign(b) * n as f64)
        .sum::<f64>()
        / counts.shots as f64
}

/// Quasi-probability distribution over bitstrings (entries may be negative).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Distribution {
    pub probabilities: BTreeMap<String, f64>,
    pub shots: u64,
    /// Factor by which the raw shot variance is inflated.
    pub variance_gain: f64,
}

impl Distribution {
    pub fn expectation(&self, obs: &Observable) -> f64 {
        self.probabilities.iter().map(|(b, p)| obs.sign(b) * p).sum()
    }
}

/// What flows backwards through the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Counts(Counts),
    Distribution(Distribution),
    Expectation(ExpectationResult),
}

impl Evaluation {
    pub fn kind(&self) -> &'static str {
        match self {
            Evaluation::Counts(_) => "counts",
            Evaluation::Distribution(_) => "a quasi-distribution",
            Evaluation::Expectation(_) => "an expectation value",
        }
    }

    /// Reduces any evaluation to an expectation value with a variance estimate.
    pub fn to_expectation(&self, obs: &Observable) -> ExpectationResult {
        match self {
            Evaluation::Counts(c) => {
                let v = expectation(c, obs);
                ExpectationResult {
                    value: v,
                    variance: (1.0 - v * v).max(0.0) / c.shots.max(1) as f64,
                    metadata: BTreeMap::new(),
                }
            }
            Evaluation::Distribution(d) => {
                let v = d.expectation(obs);
                let clipped = v.clamp(-1.0, 1.0);
                ExpectationResult {
                    value: clipped,
                    variance: (1.0 - clipped * clipped).max(0.0) * d.variance_gain / d.shots.max(1) as f64,
                    metadata: BTreeMap::new(),
                }
            }
            Evaluation::Expectation(e) => e.clone(),
        }
    }
}

/// Per-chain context handed to every stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainContext {
    pub shots: u64,
    pub observable: Observable,
}

/// One pre/post-processing wrapper.
pub trait Stage: Send {
    fn name(&self) -> &str;

    /// Expands the incoming circuits into the variants this stage needs.
    fn pre(&mut self, circuits: Vec<Circuit>, ctx: &ChainContext) -> Result<Vec<Circuit>, PipelineError>;

    /// Folds variant results back to one result per circuit given to `pre`.
    fn post(&mut self, results: Vec<Evaluation>, ctx: &ChainContext) -> Result<Vec<Evaluation>, PipelineError>;

    /// Executions per input circuit, relative to running it bare.
    fn cost_factor(&self) -> f64 {
        1.0
    }
}

type StageFactory = Arc<dyn Fn(&StageSpec) -> Result<Box<dyn Stage>, PipelineError> + Send + Sync>;

/// Name → stage factory. Read-mostly; safe to share between workers.
#[derive(Clone, Default)]
pub struct StageRegistry {
    factories: Arc<RwLock<BTreeMap<String, StageFactory>>>,
}

impl std::fmt::Debug for StageRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl StageRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with the built-in stages. ZNE is also reachable as
    /// `ErrorMitigatedExecutionBackend`.
    pub fn with_builtins() -> Self {
        let r = Self::new();
        r.register(ZNE_STAGE, |spec| Ok(Box::new(ZeroNoiseExtrapolation::from_spec(spec)?) as Box<dyn Stage>));
        r.register("ErrorMitigatedExecutionBackend", |spec| {
            Ok(Box::new(ZeroNoiseExtrapolation::from_spec(spec)?.renamed("ErrorMitigatedExecutionBackend")) as Box<dyn Stage>)
        });
        r.register(READOUT_STAGE, |spec| Ok(Box::new(ReadoutMitigation::from_spec(spec)?) as Box<dyn Stage>));
        r
    }

    pub fn register<F>(&self, name: impl Into<String>, factory: F)
    where
        F: Fn(&StageSpec) -> Result<Box<dyn Stage>, PipelineError> + Send + Sync + 'static,
    {
        self.factories.write().unwrap().insert(name.into(), Arc::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.read().unwrap().contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.read().unwrap().keys().cloned().collect()
    }

    /// Builds a chain in list order, leftmost entry outermost.
    pub fn resolve(&self, specs: &[StageSpec]) -> Result<StageChain, PipelineError> {
        let factories = self.factories.read().unwrap();
        let stages = specs
            .iter()
            .map(|spec| {
                let f = factories
                    .get(&spec.name)
                    .ok_or_else(|| PipelineError::UnknownStage(spec.name.clone()))?;
                f(spec)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StageChain { stages })
    }
}

/// Free-function form of [`StageRegistry::resolve`].
pub fn resolve(specs: &[StageSpec], registry: &StageRegistry) -> Result<StageChain, PipelineError> {
    registry.resolve(specs)
}

/// Runs circuits on a device (or anything else that yields counts).
pub trait Executor {
    fn execute(&mut self, circuit: &Circuit, shots: u64) -> Result<Counts, PipelineError>;
}

impl<F> Executor for F
where
    F: FnMut(&Circuit, u64) -> Result<Counts, PipelineError>,
{
    fn execute(&mut self, circuit: &Circuit, shots: u64) -> Result<Counts, PipelineError> {
        self(circuit, shots)
    }
}

/// Outcome of one chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub expectation: ExpectationResult,
    /// Raw counts of every executed variant, in execution order.
    pub raw: Vec<Counts>,
}

pub struct StageChain {
    stages: Vec<Box<dyn Stage>>,
}

impl std::fmt::Debug for StageChain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.stages.iter().map(|s| s.name())).finish()
    }
}

impl StageChain {
    pub fn identity() -> Self {
        StageChain { stages: Vec::new() }
    }

    pub fn from_stages(stages: Vec<Box<dyn Stage>>) -> Self {
        StageChain { stages }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.stages.iter().map(|s| s.name().to_string()).collect()
    }

    pub fn cost_factor(&self) -> f64 {
        self.stages.iter().map(|s| s.cost_factor()).product()
    }

    /// outer.pre → … → inner.pre → execute every variant → inner.post → … → outer.post.
    pub fn run(
        &mut self,
        circuit: &Circuit,
        shots: u64,
        observable: &Observable,
        executor: &mut dyn Executor,
    ) -> Result<ChainOutput, PipelineError> {
        let ctx = ChainContext {
            shots,
            observable: observable.clone(),
        };
        let mut circuits = vec![circuit.clone()];
        for stage in self.stages.iter_mut() {
            circuits = stage.pre(circuits, &ctx)?;
        }
        let mut raw = Vec::with_capacity(circuits.len());
        for c in &circuits {
            raw.push(executor.execute(c, shots)?);
        }
        let mut evals: Vec<Evaluation> = raw.iter().cloned().map(Evaluation::Counts).collect();
        for stage in self.stages.iter_mut().rev() {
            let expected_in = evals.len();
            evals = stage.post(evals, &ctx)?;
            if evals.len() > expected_in {
                return Err(PipelineError::ArityMismatch(stage.name().to_string()));
            }
        }
        let [single] = <[Evaluation; 1]>::try_from(evals)
            .map_err(|_| PipelineError::ArityMismatch("chain".into()))?;
        let mut expectation = single.to_expectation(observable);
        expectation.value = expectation.value.clamp(-1.0, 1.0);
        Ok(ChainOutput { expectation, raw })
    }
}

/// Free-function form of [`StageChain::run`].
pub fn run_chain(
    chain: &mut StageChain,
    circuit: &Circuit,
    shots: u64,
    observable: &Observable,
    executor: &mut dyn Executor,
) -> Result<ChainOutput, PipelineError> {
    chain.run(circuit, shots, observable, executor)
}
