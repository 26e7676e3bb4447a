//! Start the HTTP service in-process and drive it with the blocking client.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use qruntime::api;
use qruntime::auth::StaticTokens;
use qruntime::wire::WireWorkerRegistration;
use qruntime::Client;
use qruntime_core::backend::DeviceConfig;
use qruntime_core::platform::{Platform, PlatformConfig};

fn main() {
    let platform = Platform::start(PlatformConfig {
        fleet: vec![
            DeviceConfig {
                time_dilation_us: 0.01,
                ..DeviceConfig::linear("sim-linear-5", 5)
            },
            DeviceConfig::ring("sim-ring-7", 7).ideal(),
        ],
        ..PlatformConfig::default()
    })
    .unwrap();
    let tokens = StaticTokens::parse("# token user\ns3cret ana\n").unwrap();
    let server = api::spawn(Arc::new(platform), Arc::new(tokens), SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    println!("listening on {}", server.url());

    let client = Client::new(server.url(), Some("s3cret".into()));
    for b in client.backends().unwrap().backends {
        println!("{:<12} {} qubits, {} pending", b.backend_id, b.capabilities.num_qubits, b.pending_jobs);
    }

    let job = serde_json::json!({
        "kind": "batch",
        "backend_name": "auto",
        "items": [
            { "circuit": "qreg q[2]; creg c[2]; h q[0]; cx q[0], q[1]; measure q -> c;", "shots": 1000 },
            {
                "circuit": "qreg q[2]; creg c[2]; h q[0]; cx q[0], q[1]; measure q -> c;",
                "shots": 1000,
                "execution_options": ["readout_mitigation"]
            }
        ],
        "idempotency_key": "example-1"
    });
    let id = client.submit_json(&job).unwrap();
    let status = client.status(&id).unwrap();
    println!("{id} routed to {}, eta {:?} s", status.backend_id, status.eta_seconds);
    let done = client.wait(&id, Duration::from_secs(60), Duration::from_millis(50)).unwrap();
    println!("{id} {}", done.status);
    for item in client.results(&id).unwrap().items {
        println!("  item {}: <ZZ> = {:.4}, counts {:?}", item.index, item.expectation.value, item.counts.counts);
    }

    // a worker process announcing itself and keeping its lease alive
    let reg = WireWorkerRegistration {
        worker_id: "edge-7".into(),
        stages: ["zne".to_string()].into(),
        backends: Default::default(),
        max_parallel: 1,
    };
    let ack = client.register_worker(&reg).unwrap();
    println!("worker {} registered at {}", ack.worker_id, ack.last_heartbeat);
    println!("heartbeat at {}", client.heartbeat("edge-7").unwrap().last_heartbeat);

    match client.status("job-99999999") {
        Err(e) => println!("unknown job: {e}"),
        Ok(_) => unreachable!(),
    }
    server.stop().unwrap();
}
