//! Poll a drifting simulated device and look at its calibration history.

use std::sync::Arc;

use chrono::TimeDelta;
use qruntime_core::backend::{DeviceConfig, SimulatedDevice};
use qruntime_core::calibration::CalibrationManager;
use qruntime_core::circuit::Gate;
use qruntime_core::clock::{epoch, Clock, ManualClock};

fn main() {
    let clock = ManualClock::new(epoch());
    let shared: Arc<dyn Clock> = Arc::new(clock.clone());
    let device = SimulatedDevice::new(DeviceConfig::linear("sim-linear-5", 5), shared.clone());
    let manager = CalibrationManager::new(shared);

    for hour in 0..6 {
        let snap = manager.poll(&device).expect("device is up");
        let cx = snap.gate_error(Gate::Cx, &[0, 1]);
        println!("t+{hour}h  {}  cx(0,1) error {cx:.5}  q0 T1 {:.1} us", snap.timestamp, snap.qubits[0].t1_us);
        clock.advance(TimeDelta::hours(1));
    }

    let all = manager.history("sim-linear-5", epoch(), clock.now());
    println!("{} snapshots retained", all.len());
}
