//! Execution of one job attempt: compile once, late-bind per execution,
//! run the item pipeline on the device, report progress at boundaries.

use std::collections::BTreeMap;
use std::time::Duration;

use chrono::TimeDelta;

use crate::backend::{simulate_statevector, AdapterError, Backend, Counts};
use crate::calibration::{CalibrationError, CalibrationManager, CalibrationSnapshot};
use crate::circuit::{parse, Circuit, ParamBinding};
use crate::clock::Clock;
use crate::pipeline::{ChainOutput, PipelineError, StageRegistry};
use crate::scheduler::{
    run_spsa, Checkpoint, HybridResult, ItemResult, JobItem, JobKind, JobRecord, JobResults, Probe, SpsaOutcome, Step,
};
use crate::transpiler::{
    compile_template, record_feedback, BindRequest, CompiledTemplate, DurationModel, ExecutablePayload, Observation,
    TranspileError,
};

/// Why an attempt ended early.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    /// Worth retrying: device faults, unavailable adapters, stale data.
    #[error("{0}")]
    Transient(String),
    /// Retrying cannot help: bad stage config, untranspilable circuit.
    #[error("{0}")]
    Permanent(String),
}

impl From<PipelineError> for RunError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Execution(m) => RunError::Transient(m),
            other => RunError::Permanent(other.to_string()),
        }
    }
}

impl From<CalibrationError> for RunError {
    fn from(e: CalibrationError) -> Self {
        RunError::Transient(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(JobResults),
    /// The observer asked to stop at a boundary.
    Stopped,
}

/// Receives durable progress. Returning [`Step::Stop`] ends the attempt at
/// that boundary.
pub trait JobObserver {
    fn item_completed(&mut self, result: &ItemResult) -> Result<Step, RunError>;
    fn checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<Step, RunError>;
}

/// Observer that keeps nothing and never stops.
#[derive(Debug, Default)]
pub struct NoopObserver;

impl JobObserver for NoopObserver {
    fn item_completed(&mut self, _: &ItemResult) -> Result<Step, RunError> {
        Ok(Step::Continue)
    }

    fn checkpoint(&mut self, _: &Checkpoint) -> Result<Step, RunError> {
        Ok(Step::Continue)
    }
}

/// splitmix64 over the parts; derives per-execution sampling seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Hellinger fidelity between `counts` and the noise-free outcome
/// distribution of `circuit`; 1.0 when the ideal distribution is unavailable.
pub fn success_proxy(circuit: &Circuit, counts: &Counts) -> f64 {
    let Ok(amps) = simulate_statevector(circuit) else {
        return 1.0;
    };
    if counts.shots == 0 {
        return 1.0;
    }
    let map = circuit.measurements();
    let mut ideal: BTreeMap<String, f64> = BTreeMap::new();
    for (index, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p < 1e-15 {
            continue;
        }
        let mut value = 0usize;
        for &(q, c) in &map {
            if index >> q & 1 == 1 {
                value |= 1 << c;
            }
        }
        *ideal.entry(Counts::to_bitstring(value, circuit.num_clbits)).or_default() += p;
    }
    let bc: f64 = ideal.iter().map(|(k, p)| (p * counts.frequency(k)).sqrt()).sum();
    (bc * bc).min(1.0)
}

/// Everything an attempt needs from the platform.
pub struct JobRunner<'a> {
    pub backend: &'a dyn Backend,
    pub calibrations: &'a CalibrationManager,
    pub registry: &'a StageRegistry,
    pub durations: &'a DurationModel,
    pub clock: &'a dyn Clock,
    pub staleness_limit: TimeDelta,
    /// Longest wait for one device execution.
    pub device_timeout: Duration,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counters {
    bindings: u64,
    compiles: u32,
    recompiles: u32,
}

impl JobRunner<'_> {
    pub fn run(&self, record: &JobRecord, observer: &mut dyn JobObserver) -> Result<RunOutcome, RunError> {
        let circuits = record
            .descriptor
            .items
            .iter()
            .map(|i| parse(&i.circuit).map_err(|e| RunError::Permanent(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        match record.descriptor.kind {
            JobKind::Hybrid => self.run_hybrid(record, &circuits[0], observer),
            JobKind::Single | JobKind::Batch => self.run_items(record, &circuits, observer),
        }
    }

    fn calibration(&self) -> Result<CalibrationSnapshot, RunError> {
        let id = &self.backend.capabilities().backend_id;
        match self.calibrations.latest(id) {
            Ok(c) => Ok(c),
            Err(CalibrationError::NoData(_)) => Ok(self.calibrations.poll(self.backend)?),
            Err(e) => Err(e.into()),
        }
    }

    fn compile(&self, circuit: &Circuit, counters: &mut Counters) -> Result<CompiledTemplate, RunError> {
        let cal = self.calibration()?;
        let tpl = compile_template(circuit, self.backend.capabilities(), &cal).map_err(permanent)?;
        counters.compiles += 1;
        Ok(tpl)
    }

    /// Late binding with one calibration refresh and one recompile allowed.
    fn bind(
        &self,
        tpl: &mut CompiledTemplate,
        binding: &ParamBinding,
        shots: u64,
        seed: u64,
        counters: &mut Counters,
    ) -> Result<(ExecutablePayload, CalibrationSnapshot), RunError> {
        let (mut refreshed, mut recompiled) = (false, false);
        loop {
            let cal = self.calibration()?;
            let req = BindRequest {
                shots,
                now: self.clock.now(),
                staleness_limit: self.staleness_limit,
                seed,
            };
            match tpl.bind_with_calibration(binding, &cal, req) {
                Ok(p) => {
                    counters.bindings += 1;
                    return Ok((p, cal));
                }
                Err(TranspileError::StaleCalibration { .. }) if !refreshed => {
                    refreshed = true;
                    self.calibrations.poll(self.backend)?;
                }
                Err(TranspileError::RecompileRequired { drift_ms }) if !recompiled => {
                    tracing::info!(template = %tpl.template_id, drift_ms, "recompiling template");
                    tpl.recompile(&cal).map_err(permanent)?;
                    recompiled = true;
                    counters.compiles += 1;
                    counters.recompiles += 1;
                }
                Err(e @ (TranspileError::StaleCalibration { .. } | TranspileError::RecompileRequired { .. })) => {
                    return Err(RunError::Transient(e.to_string()))
                }
                Err(e) => return Err(permanent(e)),
            }
        }
    }

    fn execute(&self, payload: ExecutablePayload) -> Result<Counts, PipelineError> {
        let exec = |e: AdapterError| PipelineError::Execution(e.to_string());
        let backend_id = payload.backend_id.clone();
        let (circuit, shots) = (payload.circuit.clone(), payload.shots);
        let handle = self.backend.submit(payload.clone()).map_err(exec)?;
        let status = self.backend.wait(handle, self.device_timeout).map_err(exec)?;
        if !status.is_terminal() {
            return Err(PipelineError::Execution(format!("device timed out ({status:?}) on {backend_id}")));
        }
        let counts = self.backend.results(handle).map_err(exec)?;
        if let Some(device_ns) = self.backend.device_time_ns(handle) {
            let observed = Observation {
                duration_ns: device_ns / shots.max(1),
                success_rate: success_proxy(&circuit, &counts),
            };
            record_feedback(self.durations, &payload, observed);
        }
        Ok(counts)
    }

    /// Binds and runs one item through its pipeline.
    fn evaluate(
        &self,
        tpl: &mut CompiledTemplate,
        item: &JobItem,
        binding: &ParamBinding,
        seed: u64,
        counters: &mut Counters,
    ) -> Result<(ChainOutput, ExecutablePayload), RunError> {
        let mut chain = self.registry.resolve(&item.execution_options)?;
        let (payload, cal) = self.bind(tpl, binding, item.shots, seed, counters)?;
        let caps = tpl.capabilities().clone();
        let mut variant = 0u64;
        let mut executor = |c: &Circuit, shots: u64| -> Result<Counts, PipelineError> {
            let mut p = payload.with_circuit(c.clone(), &caps, &cal);
            p.shots = shots;
            p.seed = derive_seed(&[seed, variant]);
            variant += 1;
            self.execute(p)
        };
        let out = chain.run(&payload.circuit, item.shots, &item.observable, &mut executor)?;
        Ok((out, payload))
    }

    fn run_items(
        &self,
        record: &JobRecord,
        circuits: &[Circuit],
        observer: &mut dyn JobObserver,
    ) -> Result<RunOutcome, RunError> {
        let d = &record.descriptor;
        let mut results: BTreeMap<usize, ItemResult> = record.partial.iter().map(|r| (r.index, r.clone())).collect();
        let mut counters = Counters::default();
        for (index, (item, circuit)) in d.items.iter().zip(circuits).enumerate() {
            if results.contains_key(&index) {
                continue;
            }
            let mut tpl = self.compile(circuit, &mut counters)?;
            let seed = derive_seed(&[d.seed, index as u64]);
            let (out, payload) = self.evaluate(&mut tpl, item, &item.parameters, seed, &mut counters)?;
            let result = ItemResult {
                index,
                backend_id: payload.backend_id.clone(),
                counts: out.raw.first().cloned().unwrap_or_default(),
                executions: out.raw.len(),
                expectation: out.expectation,
                calibration_ts: payload.calibration_ts,
                template_id: payload.template_id,
            };
            let step = observer.item_completed(&result)?;
            results.insert(index, result);
            if step == Step::Stop && results.len() < d.items.len() {
                return Ok(RunOutcome::Stopped);
            }
        }
        Ok(RunOutcome::Completed(JobResults {
            items: results.into_values().collect(),
            hybrid: None,
        }))
    }

    fn run_hybrid(&self, record: &JobRecord, circuit: &Circuit, observer: &mut dyn JobObserver) -> Result<RunOutcome, RunError> {
        let d = &record.descriptor;
        let cfg = d
            .hybrid
            .as_ref()
            .ok_or_else(|| RunError::Permanent("hybrid job without optimizer config".into()))?;
        let item = &d.items[0];
        let resume = record.checkpoint.clone();
        let mut counters = resume.as_ref().map_or_else(Counters::default, |cp| Counters {
            bindings: cp.bindings,
            compiles: cp.compiles,
            recompiles: cp.recompiles,
        });
        let mut tpl = self.compile(circuit, &mut counters)?;
        let counters = std::cell::RefCell::new(counters);

        let evaluate = |params: &BTreeMap<String, f64>, k: u32, probe: Probe| -> Result<f64, RunError> {
            let mut binding = item.parameters.clone();
            binding.values.extend(params.iter().map(|(n, v)| (n.clone(), *v)));
            let seed = derive_seed(&[d.seed, k as u64, probe.index()]);
            let (out, _) = self.evaluate(&mut tpl, item, &binding, seed, &mut counters.borrow_mut())?;
            Ok(out.expectation.value)
        };
        let checkpoint = |cp: &Checkpoint| -> Result<Step, RunError> {
            let c = *counters.borrow();
            let cp = Checkpoint {
                bindings: c.bindings,
                compiles: c.compiles,
                recompiles: c.recompiles,
                ..cp.clone()
            };
            observer.checkpoint(&cp)
        };
        let cp = match run_spsa(cfg, resume, evaluate, checkpoint)? {
            SpsaOutcome::Finished(cp) => cp,
            SpsaOutcome::Interrupted(_) => return Ok(RunOutcome::Stopped),
        };
        let c = *counters.borrow();
        Ok(RunOutcome::Completed(JobResults {
            items: Vec::new(),
            hybrid: Some(HybridResult {
                best_value: cp.best_value.unwrap_or(f64::NAN),
                best_params: cp.best_params,
                final_params: cp.params,
                iterations: cp.iteration,
                trace: cp.trace,
                bindings: c.bindings,
                compile_count: c.compiles,
                recompiles: c.recompiles,
            }),
        }))
    }
}

fn permanent(e: TranspileError) -> RunError {
    RunError::Permanent(e.to_string())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backend::{DeviceConfig, SimulatedDevice};
    use crate::clock::{epoch, ManualClock};
    use crate::pipeline::StageSpec;
    use crate::scheduler::{HybridConfig, JobDescriptor, JobStatus, SpsaConfig};
    use crate::transpiler::DEFAULT_STALENESS_LIMIT;

    const BELL: &str = "qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;";
    const RY: &str = "input float theta; qreg q[1]; creg c[1]; ry(theta) q[0]; measure q[0] -> c[0];";

    struct Fixture {
        clock: ManualClock,
        device: SimulatedDevice,
        calibrations: CalibrationManager,
        registry: StageRegistry,
        durations: DurationModel,
    }

    impl Fixture {
        fn new(config: DeviceConfig) -> Self {
            let clock = ManualClock::new(epoch());
            let device = SimulatedDevice::new(config, Arc::new(clock.clone()));
            let calibrations = CalibrationManager::new(Arc::new(clock.clone()));
            Fixture {
                clock,
                device,
                calibrations,
                registry: StageRegistry::with_builtins(),
                durations: DurationModel::new(),
            }
        }

        fn runner(&self) -> JobRunner<'_> {
            JobRunner {
                backend: &self.device,
                calibrations: &self.calibrations,
                registry: &self.registry,
                durations: &self.durations,
                clock: &self.clock,
                staleness_limit: DEFAULT_STALENESS_LIMIT,
                device_timeout: Duration::from_secs(10),
            }
        }
    }

    fn record(descriptor: JobDescriptor) -> JobRecord {
        JobRecord {
            job_id: "job-1".into(),
            backend_id: descriptor.backend_name.clone(),
            required_stages: descriptor.required_stages(),
            descriptor,
            status: JobStatus::Running,
            attempts: 1,
            submitted_at: epoch(),
            started_at: Some(epoch()),
            finished_at: None,
            not_before: None,
            estimated_duration_ns: 0,
            worker_id: None,
            checkpoint: None,
            partial: Vec::new(),
            results: None,
            error: None,
            cancel_requested: false,
        }
    }

    fn hybrid(iterations: u32) -> JobDescriptor {
        let cfg = HybridConfig {
            initial_params: [("theta".to_string(), 0.4)].into_iter().collect(),
            iterations,
            spsa: SpsaConfig::default(),
            seed: 3,
        };
        JobDescriptor::hybrid("u", "sim", JobItem::new(RY, 200), cfg)
    }

    fn completed(o: RunOutcome) -> JobResults {
        match o {
            RunOutcome::Completed(r) => r,
            RunOutcome::Stopped => panic!("stopped"),
        }
    }

    #[test]
    fn seeds_differ_by_every_part() {
        let base = derive_seed(&[1, 2, 3]);
        assert_ne!(base, derive_seed(&[1, 2, 4]));
        assert_ne!(base, derive_seed(&[2, 2, 3]));
        assert_eq!(base, derive_seed(&[1, 2, 3]));
    }

    #[test]
    fn proxy_is_one_for_ideal_counts() {
        let c = parse(BELL).unwrap();
        assert!((success_proxy(&c, &Counts::from([("00", 50), ("11", 50)])) - 1.0).abs() < 1e-12);
        assert!(success_proxy(&c, &Counts::from([("01", 100)])) < 1e-12);
    }

    #[test]
    fn bell_item_on_ideal_device() {
        let f = Fixture::new(DeviceConfig::linear("sim", 3).ideal());
        let r = completed(f.runner().run(&record(JobDescriptor::single("u", "sim", JobItem::new(BELL, 500))), &mut NoopObserver).unwrap());
        let item = &r.items[0];
        assert_eq!(item.counts.shots, 500);
        assert_eq!(item.counts.get("00") + item.counts.get("11"), 500);
        assert_eq!(item.executions, 1);
        assert!(f.durations.state()["sim"].samples >= 1);
    }

    #[test]
    fn zne_runs_three_variants() {
        let f = Fixture::new(DeviceConfig::linear("sim", 3).ideal());
        let item = JobItem::new(BELL, 100).with_stage(StageSpec::named("zne"));
        let r = completed(f.runner().run(&record(JobDescriptor::single("u", "sim", item)), &mut NoopObserver).unwrap());
        assert_eq!(r.items[0].executions, 3);
        assert!((r.items[0].expectation.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_stage_is_permanent() {
        let f = Fixture::new(DeviceConfig::linear("sim", 3).ideal());
        let item = JobItem::new(BELL, 100).with_stage(StageSpec::named("nope"));
        let err = f.runner().run(&record(JobDescriptor::single("u", "sim", item)), &mut NoopObserver).unwrap_err();
        assert!(matches!(err, RunError::Permanent(_)));
    }

    #[test]
    fn device_fault_is_transient() {
        let f = Fixture::new(DeviceConfig::linear("sim", 3).ideal());
        f.device.fail_next(1);
        let err = f
            .runner()
            .run(&record(JobDescriptor::single("u", "sim", JobItem::new(BELL, 10))), &mut NoopObserver)
            .unwrap_err();
        assert!(matches!(err, RunError::Transient(_)));
    }

    #[test]
    fn batch_skips_completed_items() {
        let f = Fixture::new(DeviceConfig::linear("sim", 3).ideal());
        let d = JobDescriptor::batch("u", "sim", vec![JobItem::new(BELL, 10), JobItem::new(BELL, 20)]);
        let mut rec = record(d);
        let first = completed(f.runner().run(&rec, &mut NoopObserver).unwrap()).items[0].clone();
        rec.partial.push(first.clone());
        f.device.fail_next(0);
        let before = f.durations.state()["sim"].samples;
        let again = completed(f.runner().run(&rec, &mut NoopObserver).unwrap());
        assert_eq!(again.items[0], first);
        assert_eq!(f.durations.state()["sim"].samples, before + 1);
    }

    #[test]
    fn hybrid_compiles_once_and_binds_every_evaluation() {
        let f = Fixture::new(DeviceConfig::linear("sim", 3).ideal());
        let h = completed(f.runner().run(&record(hybrid(10)), &mut NoopObserver).unwrap()).hybrid.unwrap();
        assert_eq!(h.compile_count, 1);
        assert_eq!(h.bindings, 20);
        assert_eq!(h.iterations, 10);
        assert!(h.best_value < 0.4f64.cos());
    }

    struct Drifting<'a>(&'a ManualClock, Vec<Checkpoint>);

    impl JobObserver for Drifting<'_> {
        fn item_completed(&mut self, _: &ItemResult) -> Result<Step, RunError> {
            Ok(Step::Continue)
        }

        fn checkpoint(&mut self, cp: &Checkpoint) -> Result<Step, RunError> {
            self.0.advance(TimeDelta::seconds(200));
            self.1.push(cp.clone());
            Ok(Step::Continue)
        }
    }

    #[test]
    fn drift_triggers_refresh_and_recompile() {
        let f = Fixture::new(DeviceConfig::linear("sim", 3).ideal());
        let mut obs = Drifting(&f.clock, Vec::new());
        let h = completed(f.runner().run(&record(hybrid(6)), &mut obs).unwrap()).hybrid.unwrap();
        assert!(h.recompiles >= 1);
        assert_eq!(h.compile_count, 1 + h.recompiles);
        assert_eq!(h.bindings, 12);
        assert!(obs.1.windows(2).all(|w| w[0].bindings < w[1].bindings));
    }

    struct StopAt(u32);

    impl JobObserver for StopAt {
        fn item_completed(&mut self, _: &ItemResult) -> Result<Step, RunError> {
            Ok(Step::Continue)
        }

        fn checkpoint(&mut self, cp: &Checkpoint) -> Result<Step, RunError> {
            Ok(if cp.iteration == self.0 { Step::Stop } else { Step::Continue })
        }
    }

    struct Keep(Option<Checkpoint>);

    impl JobObserver for Keep {
        fn item_completed(&mut self, _: &ItemResult) -> Result<Step, RunError> {
            Ok(Step::Continue)
        }

        fn checkpoint(&mut self, cp: &Checkpoint) -> Result<Step, RunError> {
            self.0 = Some(cp.clone());
            Ok(if cp.iteration == 4 { Step::Stop } else { Step::Continue })
        }
    }

    #[test]
    fn resumed_hybrid_matches_uninterrupted() {
        let config = DeviceConfig::linear("sim", 3).ideal();
        let full = Fixture::new(config.clone());
        let reference = completed(full.runner().run(&record(hybrid(9)), &mut NoopObserver).unwrap()).hybrid.unwrap();

        let f = Fixture::new(config);
        let mut rec = record(hybrid(9));
        assert_eq!(f.runner().run(&rec, &mut StopAt(4)).unwrap(), RunOutcome::Stopped);
        let mut keep = Keep(None);
        f.runner().run(&rec, &mut keep).unwrap();
        rec.checkpoint = keep.0;
        let resumed = completed(f.runner().run(&rec, &mut NoopObserver).unwrap()).hybrid.unwrap();
        assert_eq!(resumed.trace, reference.trace);
        assert_eq!(resumed.best_params, reference.best_params);
        assert_eq!(resumed.bindings, reference.bindings);
        assert_eq!(resumed.compile_count, 2);
    }
}
