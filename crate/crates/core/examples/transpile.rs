//! Compile a circuit once against a calibration, then bind it repeatedly.

use chrono::TimeDelta;
use qruntime_core::backend::DeviceConfig;
use qruntime_core::circuit::{parse, ParamBinding};
use qruntime_core::clock::epoch;
use qruntime_core::transpiler::{compile_template, BindRequest};

fn main() {
    let device = DeviceConfig::ring("ring-5", 5);
    let caps = device.capabilities();
    let cal = device.initial_calibration(&caps, epoch());

    let circuit = parse(
        "input float gamma; qreg q[3]; creg c[3];
         h q[0]; h q[1]; h q[2];
         cx q[0], q[2]; rz(gamma) q[2]; cx q[0], q[2];
         measure q -> c;",
    )
    .unwrap();
    let tpl = compile_template(&circuit, &caps, &cal).expect("compiles");
    println!("template {} on {}", tpl.template_id, tpl.backend_id);
    println!("layout {:?}, output permutation {:?}", tpl.layout, tpl.output_permutation);
    println!("{} gates before, {} after routing and decomposition", circuit.gate_count(), tpl.routed.gate_count());

    for (i, gamma) in [0.1, 0.2, 0.4, 0.8].into_iter().enumerate() {
        let binding: ParamBinding = [("gamma".to_string(), gamma)].into_iter().collect();
        let req = BindRequest {
            shots: 1000,
            now: epoch() + TimeDelta::seconds(10),
            staleness_limit: TimeDelta::minutes(5),
            seed: i as u64,
        };
        let payload = tpl.bind_with_calibration(&binding, &cal, req).unwrap();
        println!(
            "gamma={gamma:.1}: est. fidelity {:.4}, est. duration {} ns",
            payload.estimated_fidelity, payload.estimated_duration_ns
        );
    }
    println!("compiles {}, bindings {}", tpl.compile_count(), tpl.bind_count());
}
