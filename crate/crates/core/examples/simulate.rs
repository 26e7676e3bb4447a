//! Run circuits on the noisy simulator directly and through a device queue.

use std::sync::Arc;
use std::time::Duration;

use qruntime_core::backend::{simulate_counts, Backend, DeviceConfig, NoiseModel, SimulatedDevice};
use qruntime_core::circuit::parse;
use qruntime_core::clock::SystemClock;
use qruntime_core::pipeline::expectation_z;
use qruntime_core::transpiler::compile_template;

fn main() {
    let bell = parse("qreg q[2]; creg c[2]; h q[0]; cx q[0], q[1]; measure q -> c;").unwrap();

    let ideal = simulate_counts(&bell, &NoiseModel::ideal(), 4096, 1).unwrap();
    println!("ideal:     {:?}", ideal.counts);
    let noise = NoiseModel::ideal().with_depolarizing(0.02).with_readout(0, 0.05).with_readout(1, 0.05);
    let noisy = simulate_counts(&bell, &noise, 4096, 1).unwrap();
    println!("noisy:     {:?}  <ZZ> = {:.3}", noisy.counts, expectation_z(&noisy));

    let device = SimulatedDevice::new(
        DeviceConfig {
            time_dilation_us: 0.01,
            ..DeviceConfig::linear("sim-linear-5", 5)
        },
        Arc::new(SystemClock),
    );
    let cal = device.calibration().unwrap();
    let tpl = compile_template(&bell, device.capabilities(), &cal).unwrap();
    let payload = tpl
        .bind_with_calibration(&Default::default(), &cal, qruntime_core::transpiler::BindRequest {
            shots: 2000,
            now: cal.timestamp,
            staleness_limit: chrono::TimeDelta::minutes(5),
            seed: 7,
        })
        .unwrap();
    let handle = device.submit(payload).unwrap();
    println!("submitted as {handle:?}, queue depth {}", device.queue_depth());
    device.wait(handle, Duration::from_secs(10)).unwrap();
    let counts = device.results(handle).unwrap();
    println!("device:    {:?}", counts.counts);
}
