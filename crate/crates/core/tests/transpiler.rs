mod support;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::TimeDelta;
use proptest::prelude::*;
use qruntime_core::calibration::CalibrationSnapshot;
use qruntime_core::circuit::{parse, Circuit, Gate, Instruction, ParamBinding};
use qruntime_core::clock::epoch;
use qruntime_core::transpiler::{
    compile_template, decompose, default_basis, layout_score, record_feedback, route, select_layout,
    BackendCapabilities, BindRequest, DurationModel, Observation, TranspileError, DEFAULT_STALENESS_LIMIT,
};
use support::oracle;

fn basis() -> BTreeSet<Gate> {
    default_basis()
}

fn assert_equivalent(a: &Circuit, b: &Circuit) {
    let d = oracle::phase_distance(&oracle::statevector(a), &oracle::statevector(b));
    assert!(d <= 1e-9, "distance {d}");
}

#[test]
fn single_qubit_rules_match_up_to_phase() {
    for g in ["h", "x", "y", "z", "s", "sdg", "t", "tdg", "sx", "rx(0.7)", "ry(-1.3)", "rz(2.1)"] {
        // prefix with a generic rotation so the comparison is not on |0⟩ alone
        let src = parse(&format!("qreg q[1]; ry(0.4) q[0]; rz(0.9) q[0]; {g} q[0];")).unwrap();
        assert_equivalent(&src, &decompose(&src, &basis()).unwrap());
    }
}

#[test]
fn hadamard_becomes_rz_sx_rz() {
    let out = decompose(&parse("qreg q[1]; h q[0];").unwrap(), &basis()).unwrap();
    let names: Vec<&str> = out.instructions.iter().map(|i| i.gate.name()).collect();
    assert_eq!(names, ["rz", "sx", "rz"]);
    assert_eq!(out.instructions[0].angle(), Some(PI / 2.0));
    assert_eq!(out.instructions[2].angle(), Some(PI / 2.0));
}

#[test]
fn basis_gate_is_untouched() {
    let c = parse("qreg q[1]; x q[0];").unwrap();
    assert_eq!(decompose(&c, &basis()).unwrap(), c);
}

#[test]
fn swap_is_three_cx() {
    let c = parse("qreg q[2]; swap q[0],q[1];").unwrap();
    let out = decompose(&c, &basis()).unwrap();
    assert_eq!(out, parse("qreg q[2]; cx q[0],q[1]; cx q[1],q[0]; cx q[0],q[1];").unwrap());
    let prep = "qreg q[2]; ry(0.3) q[0]; rx(1.2) q[1]; cx q[0],q[1]; ";
    assert_equivalent(
        &parse(&format!("{prep} swap q[0],q[1];")).unwrap(),
        &parse(&format!("{prep} cx q[0],q[1]; cx q[1],q[0]; cx q[0],q[1];")).unwrap(),
    );
}

#[test]
fn cz_matches_oracle() {
    let c = parse("qreg q[2]; h q[0]; ry(0.8) q[1]; cz q[0],q[1];").unwrap();
    assert_equivalent(&c, &decompose(&c, &basis()).unwrap());
}

#[test]
fn missing_rule_is_unsupported() {
    let only_1q: BTreeSet<Gate> = [Gate::Rz, Gate::Sx].into();
    let c = parse("qreg q[2]; cz q[0],q[1];").unwrap();
    assert_eq!(decompose(&c, &only_1q), Err(TranspileError::UnsupportedGate(Gate::Cz)));
}

#[test]
fn route_swaps_along_line() {
    let caps = BackendCapabilities::line("l3", 3);
    let c = parse("qreg q[3]; h q[0]; cx q[0],q[2];").unwrap();
    let basis_only = decompose(&c, &basis()).unwrap();
    let routed = route(&basis_only, &caps, &[0, 1, 2]).unwrap();
    let tail: Vec<(Gate, Vec<usize>)> = routed.circuit.instructions[3..]
        .iter()
        .map(|i| (i.gate, i.qubits.clone()))
        .collect();
    assert_eq!(
        tail,
        vec![
            (Gate::Cx, vec![0, 1]),
            (Gate::Cx, vec![1, 0]),
            (Gate::Cx, vec![0, 1]),
            (Gate::Cx, vec![1, 2]),
        ]
    );
    assert_eq!(routed.output_permutation, vec![1, 0, 2]);
    let want = oracle::embed(&oracle::statevector(&c), &routed.output_permutation, 3);
    assert!(oracle::phase_distance(&want, &oracle::statevector(&routed.circuit)) <= 1e-9);
}

#[test]
fn coupled_pair_routes_unchanged() {
    let caps = BackendCapabilities::line("l3", 3);
    let c = parse("qreg q[2]; cx q[0],q[1];").unwrap();
    let routed = route(&c, &caps, &[0, 1]).unwrap();
    assert_eq!(routed.circuit.instructions, c.instructions);
    assert_eq!(routed.output_permutation, vec![0, 1]);
}

#[test]
fn disconnected_pair_fails() {
    let caps = BackendCapabilities::new("split", 4, &[(0, 1), (2, 3)]);
    let c = parse("qreg q[4]; cx q[0],q[3];").unwrap();
    assert_eq!(route(&c, &caps, &[0, 1, 2, 3]), Err(TranspileError::DisconnectedQubits(0, 3)));
}

#[test]
fn layout_prefers_the_better_edge() {
    let caps = BackendCapabilities::line("l3", 3);
    let mut cal = CalibrationSnapshot::uniform(&caps, epoch(), 0.0, 0.0, 0.0);
    cal.set_gate_error(Gate::Cx, &[0, 1], 0.05);
    cal.set_gate_error(Gate::Cx, &[1, 2], 0.01);
    let c = parse("qreg q[2]; cx q[0],q[1];").unwrap();
    assert_eq!(select_layout(&c, &caps, &cal), vec![1, 2]);
}

#[test]
fn layout_prefers_the_better_readout() {
    let caps = BackendCapabilities::line("l2", 2);
    let mut cal = CalibrationSnapshot::uniform(&caps, epoch(), 0.0, 0.0, 0.0);
    cal.set_readout_error(0, 0.10);
    cal.set_readout_error(1, 0.02);
    let c = parse("qreg q[1]; creg c[1]; measure q[0] -> c[0];").unwrap();
    assert_eq!(select_layout(&c, &caps, &cal), vec![1]);
}

#[test]
fn uniform_layout_is_lexicographic() {
    let caps = BackendCapabilities::ring("r5", 5);
    let cal = CalibrationSnapshot::uniform(&caps, epoch(), 1e-3, 1e-2, 1e-2);
    let c = parse("qreg q[3]; creg c[3]; h q[0]; cx q[0],q[1]; cx q[1],q[2]; measure q -> c;").unwrap();
    assert_eq!(select_layout(&c, &caps, &cal), vec![0, 1, 2]);
}

fn sample_template() -> (Circuit, BackendCapabilities, CalibrationSnapshot) {
    let caps = BackendCapabilities::line("l3", 3);
    let cal = CalibrationSnapshot::uniform(&caps, epoch(), 1e-3, 1e-2, 2e-2);
    let c = parse("input float theta; qreg q[2]; creg c[2]; ry(theta) q[0]; cx q[0],q[1]; measure q -> c;").unwrap();
    (c, caps, cal)
}

fn req(now: chrono::DateTime<chrono::Utc>) -> BindRequest {
    BindRequest {
        shots: 100,
        now,
        staleness_limit: DEFAULT_STALENESS_LIMIT,
        seed: 0,
    }
}

#[test]
fn hundred_bindings_one_compile() {
    let (c, caps, cal) = sample_template();
    let tpl = compile_template(&c, &caps, &cal).unwrap();
    for k in 0..100 {
        let p = tpl
            .bind_with_calibration(&ParamBinding::from([("theta", k as f64 * 0.01)]), &cal, req(cal.timestamp))
            .unwrap();
        assert!(p.circuit.symbols.is_empty());
    }
    assert_eq!(tpl.compile_count(), 1);
    assert_eq!(tpl.bind_count(), 100);
}

#[test]
fn non_parametric_template_has_no_symbols() {
    let caps = BackendCapabilities::line("l3", 3);
    let cal = CalibrationSnapshot::uniform(&caps, epoch(), 1e-3, 1e-2, 2e-2);
    let tpl = compile_template(&parse("qreg q[1]; h q[0];").unwrap(), &caps, &cal).unwrap();
    assert!(tpl.routed.symbols.is_empty());
}

#[test]
fn unbound_symbol_is_reported() {
    let (c, caps, cal) = sample_template();
    let tpl = compile_template(&c, &caps, &cal).unwrap();
    assert!(matches!(
        tpl.bind_with_calibration(&ParamBinding::default(), &cal, req(cal.timestamp)),
        Err(TranspileError::Circuit(_))
    ));
}

#[test]
fn staleness_and_drift() {
    let (c, caps, cal) = sample_template();
    let mut tpl = compile_template(&c, &caps, &cal).unwrap();
    let b = ParamBinding::from([("theta", 0.1)]);
    let late = cal.timestamp + TimeDelta::minutes(10);
    assert!(matches!(
        tpl.bind_with_calibration(&b, &cal, req(late)),
        Err(TranspileError::StaleCalibration { .. })
    ));
    let mut fresh = cal.clone();
    fresh.timestamp = late;
    assert!(matches!(
        tpl.bind_with_calibration(&b, &fresh, req(late)),
        Err(TranspileError::RecompileRequired { .. })
    ));
    tpl.recompile(&fresh).unwrap();
    assert_eq!(tpl.compile_count(), 2);
    assert!(tpl.bind_with_calibration(&b, &fresh, req(late)).is_ok());
}

#[test]
fn fidelity_and_duration_estimates() {
    let caps = BackendCapabilities::line("l2", 2);
    let cal = CalibrationSnapshot::uniform(&caps, epoch(), 0.01, 0.01, 0.02);
    let c = parse("qreg q[2]; creg c[1]; sx q[0]; cx q[0],q[1]; measure q[0] -> c[0];").unwrap();
    let tpl = compile_template(&c, &caps, &cal).unwrap();
    let p = tpl.bind_with_calibration(&ParamBinding::default(), &cal, req(cal.timestamp)).unwrap();
    assert!((p.estimated_fidelity - 0.99 * 0.99 * 0.98).abs() < 1e-15);
    // 35 + 300 + 1000 = 1335, next multiple of 8
    assert_eq!(p.estimated_duration_ns, 1336);

    let ideal = CalibrationSnapshot::uniform(&caps, epoch(), 0.0, 0.0, 0.0);
    let p = tpl.bind_with_calibration(&ParamBinding::default(), &ideal, req(ideal.timestamp)).unwrap();
    assert_eq!(p.estimated_fidelity, 1.0);
}

#[test]
fn feedback_ewma() {
    let (c, caps, cal) = sample_template();
    let tpl = compile_template(&c, &caps, &cal).unwrap();
    let mut p = tpl
        .bind_with_calibration(&ParamBinding::from([("theta", 0.0)]), &cal, req(cal.timestamp))
        .unwrap();
    p.estimated_duration_ns = 100;
    let model = DurationModel::new();
    let obs = |d| Observation { duration_ns: d, success_rate: 0.9 };
    assert!((record_feedback(&model, &p, obs(200)) - 120.0).abs() < 1e-9);

    let model = DurationModel::new();
    assert_eq!(record_feedback(&model, &p, obs(100)), 100.0);

    let model = DurationModel::new();
    let mut last = 100.0;
    for _ in 0..3 {
        let next = record_feedback(&model, &p, obs(160));
        assert!(next > last && next < 160.0);
        last = next;
    }
}

fn devices() -> Vec<BackendCapabilities> {
    vec![
        BackendCapabilities::line("line-5", 5),
        BackendCapabilities::ring("ring-5", 5),
        BackendCapabilities::new("tee-5", 5, &[(0, 1), (1, 2), (1, 3), (3, 4)]),
        BackendCapabilities::ring("ring-7", 7),
    ]
}

const ONE_Q: [Gate; 12] = [
    Gate::H,
    Gate::X,
    Gate::Y,
    Gate::Z,
    Gate::S,
    Gate::Sdg,
    Gate::T,
    Gate::Tdg,
    Gate::Sx,
    Gate::Rx,
    Gate::Ry,
    Gate::Rz,
];
const TWO_Q: [Gate; 3] = [Gate::Cx, Gate::Cz, Gate::Swap];

prop_compose! {
    fn arb_circuit()(n in 1usize..=5)
        (n in Just(n), ops in prop::collection::vec((0usize..15, 0usize..5, 1usize..5, -PI..PI), 0..=20))
        -> Circuit {
        let mut c = Circuit::new(n, n);
        for (g, a, off, theta) in ops {
            let inst = if g < ONE_Q.len() || n == 1 {
                let gate = ONE_Q[g % ONE_Q.len()];
                if gate.is_rotation() {
                    Instruction::rotation(gate, a % n, theta)
                } else {
                    Instruction::new(gate, vec![a % n])
                }
            } else {
                let (qa, qb) = (a % n, (a % n + off % (n - 1) + 1) % n);
                Instruction::new(TWO_Q[g - ONE_Q.len()], vec![qa, qb])
            };
            c.push(inst).unwrap();
        }
        c
    }
}

fn random_calibration(caps: &BackendCapabilities, errs: &[f64]) -> CalibrationSnapshot {
    let mut cal = CalibrationSnapshot::uniform(caps, epoch(), 1e-3, 1e-2, 1e-2);
    let mut it = errs.iter().cycle();
    for q in 0..caps.num_qubits {
        cal.set_gate_error(Gate::Sx, &[q], it.next().unwrap() * 0.01);
        cal.set_gate_error(Gate::X, &[q], it.next().unwrap() * 0.01);
        cal.set_readout_error(q, it.next().unwrap() * 0.1);
    }
    for &(a, b) in &caps.coupling {
        cal.set_gate_error(Gate::Cx, &[a, b], it.next().unwrap() * 0.1);
    }
    cal
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compiled_circuit_is_equivalent(
        c in arb_circuit(),
        dev in 0usize..4,
        errs in prop::collection::vec(0.0f64..1.0, 8..32),
    ) {
        let caps = &devices()[dev];
        let cal = random_calibration(caps, &errs);
        let tpl = compile_template(&c, caps, &cal).unwrap();
        for inst in &tpl.routed.instructions {
            prop_assert!(!inst.gate.is_unitary() || caps.basis_gates.contains(&inst.gate));
            if inst.gate.is_two_qubit() {
                prop_assert!(caps.is_coupled(inst.qubits[0], inst.qubits[1]));
            }
        }
        let want = oracle::embed(&oracle::statevector(&c), &tpl.output_permutation, caps.num_qubits);
        let got = oracle::statevector(&tpl.routed);
        prop_assert!(oracle::phase_distance(&want, &got) <= 1e-9);
    }

    #[test]
    fn layout_matches_brute_force(
        c in arb_circuit(),
        m in 2usize..=6,
        ring in any::<bool>(),
        errs in prop::collection::vec(0.0f64..1.0, 8..32),
    ) {
        let m = m.max(c.num_qubits);
        let caps = if ring && m > 2 { BackendCapabilities::ring("r", m) } else { BackendCapabilities::line("l", m) };
        let cal = random_calibration(&caps, &errs);
        let chosen = select_layout(&c, &caps, &cal);
        let best = brute_force_min(&c, &caps, &cal);
        prop_assert_eq!(layout_score(&c, &caps, &cal, &chosen), best);
    }
}

fn brute_force_min(c: &Circuit, caps: &BackendCapabilities, cal: &CalibrationSnapshot) -> f64 {
    fn go(
        c: &Circuit,
        caps: &BackendCapabilities,
        cal: &CalibrationSnapshot,
        cur: &mut Vec<usize>,
        best: &mut f64,
    ) {
        if cur.len() == c.num_qubits {
            *best = best.min(layout_score(c, caps, cal, cur));
            return;
        }
        for p in 0..caps.num_qubits {
            if !cur.contains(&p) {
                cur.push(p);
                go(c, caps, cal, cur, best);
                cur.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    go(c, caps, cal, &mut Vec::new(), &mut best);
    best
}
