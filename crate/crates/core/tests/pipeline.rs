use qruntime_core::backend::{simulate_counts, Counts, NoiseModel};
use qruntime_core::circuit::{parse, Circuit};
use qruntime_core::pipeline::{
    expectation_z, zne_fold, Observable, PipelineError, ReadoutMitigation, StageChain, StageRegistry, StageSpec,
    ZeroNoiseExtrapolation,
};

const BELL4: &str = "qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; x q[0]; x q[1]; measure q -> c;";

fn noisy_executor(noise: NoiseModel, seed: u64) -> impl FnMut(&Circuit, u64) -> Result<Counts, PipelineError> {
    let mut k = 0u64;
    move |c: &Circuit, shots| {
        k += 1;
        simulate_counts(c, &noise, shots, seed.wrapping_mul(1000).wrapping_add(k))
            .map_err(|e| PipelineError::Execution(e.to_string()))
    }
}

#[test]
fn zne_beats_raw_on_most_seeds() {
    let c = parse(BELL4).unwrap();
    let noise = NoiseModel::ideal().with_depolarizing(0.02);
    let mut wins = 0;
    for seed in 0..100 {
        let mut chain = StageChain::from_stages(vec![Box::new(ZeroNoiseExtrapolation::default())]);
        let out = chain.run(&c, 4096, &Observable::all(), &mut noisy_executor(noise.clone(), seed)).unwrap();
        let raw = expectation_z(&out.raw[0]);
        if (out.expectation.value - 1.0).abs() < (raw - 1.0).abs() {
            wins += 1;
        }
    }
    println!("zne wins {wins}/100");
    assert!(wins >= 80, "zne won only {wins}/100");
}

#[test]
fn folding_keeps_noiseless_expectation() {
    let c = parse(BELL4).unwrap();
    for scale in [1, 3, 5, 7] {
        let counts = simulate_counts(&zne_fold(&c, scale), &NoiseModel::ideal(), 2048, scale as u64).unwrap();
        assert_eq!(expectation_z(&counts), 1.0);
    }
}

#[test]
fn readout_mitigation_removes_bias() {
    let c = parse("qreg q[1]; creg c[1]; measure q[0] -> c[0];").unwrap();
    let noise = NoiseModel::ideal().with_readout(0, 0.1);
    let mut chain = StageChain::from_stages(vec![Box::new(ReadoutMitigation::with_known_error(0.1))]);
    let out = chain.run(&c, 8192, &Observable::all(), &mut noisy_executor(noise, 7)).unwrap();
    let raw = expectation_z(&out.raw[0]);
    assert!((raw - 0.8).abs() < 0.03, "raw {raw}");
    assert!((out.expectation.value - 1.0).abs() <= 0.05);
}

#[test]
fn zne_outside_readout_mitigation() {
    let registry = StageRegistry::with_builtins();
    let mut chain = registry
        .resolve(&[StageSpec::named("ErrorMitigatedExecutionBackend"), StageSpec::named("readout_mitigation")])
        .unwrap();
    let c = parse(BELL4).unwrap();
    let noise = NoiseModel::ideal().with_depolarizing(0.01).with_readout(0, 0.05).with_readout(1, 0.05);
    let out = chain.run(&c, 4096, &Observable::all(), &mut noisy_executor(noise, 3)).unwrap();
    // 3 folded variants + 2 calibration circuits
    assert_eq!(out.raw.len(), 5);
    assert!((out.expectation.value - 1.0).abs() < 0.1);
    assert_eq!(out.expectation.metadata["scales"], vec![1.0, 3.0, 5.0]);
}

#[test]
fn readout_mitigation_needs_raw_counts() {
    let registry = StageRegistry::with_builtins();
    let mut chain = registry
        .resolve(&[StageSpec::named("readout_mitigation"), StageSpec::named("zne")])
        .unwrap();
    let c = parse(BELL4).unwrap();
    let err = chain
        .run(&c, 100, &Observable::all(), &mut noisy_executor(NoiseModel::ideal(), 1))
        .unwrap_err();
    assert!(matches!(err, PipelineError::UnexpectedInput { .. }));
}
