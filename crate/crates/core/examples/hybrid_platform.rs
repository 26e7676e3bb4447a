//! An in-process platform running a variational (SPSA) job end to end.

use std::collections::BTreeMap;
use std::time::Duration;

use qruntime_core::backend::DeviceConfig;
use qruntime_core::platform::{Platform, PlatformConfig};
use qruntime_core::scheduler::{HybridConfig, JobDescriptor, JobItem, SpsaConfig};

fn main() {
    let platform = Platform::start(PlatformConfig {
        fleet: vec![DeviceConfig {
            time_dilation_us: 0.01,
            ..DeviceConfig::linear("sim-linear-5", 5)
        }],
        ..PlatformConfig::default()
    })
    .unwrap();

    // minimize <Z> of ry(theta)|0>, i.e. drive theta towards pi
    let ansatz = "input float theta; qreg q[1]; creg c[1]; ry(theta) q[0]; measure q[0] -> c[0];";
    let config = HybridConfig {
        initial_params: BTreeMap::from([("theta".to_string(), 0.5)]),
        iterations: 60,
        spsa: SpsaConfig { a: 0.6, c: 0.2 },
        seed: 17,
    };
    let item = JobItem::new(ansatz, 500).with_stage(qruntime_core::pipeline::StageSpec::named("readout_mitigation"));
    let id = platform
        .submit(JobDescriptor::hybrid("ana", "sim-linear-5", item, config))
        .unwrap();
    let job = platform.wait_for(&id, Duration::from_secs(120)).unwrap();
    let h = job.results.and_then(|r| r.hybrid).expect("hybrid result");
    println!("{id}: {}", job.status);
    println!("best <Z> {:.4} at theta {:.4}", h.best_value, h.best_params["theta"]);
    println!("{} iterations, {} compile(s), {} bindings", h.iterations, h.compile_count, h.bindings);
    for it in h.trace.iter().step_by(10) {
        println!("  iter {:>2}: y+ {:+.3}  y- {:+.3}  theta {:.3}", it.iteration, it.value_plus, it.value_minus, it.params["theta"]);
    }
}
