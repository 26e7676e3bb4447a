mod common;

use serde_json::Value;

use common::child::{write_config, Server};

const FLEET: &str = r#"
[[backends]]
id = "sim-a"
num_qubits = 3
topology = "line"
ideal = true

[[backends]]
id = "sim-b"
num_qubits = 5
topology = "ring"
time_dilation_us = 0.05
"#;

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn serve_submit_wait_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLEET);
    let job = dir.path().join("bell.json");
    std::fs::write(
        &job,
        serde_json::json!({
            "kind": "single",
            "backend_name": "sim-a",
            "items": [{ "circuit": common::BELL, "shots": 256 }]
        })
        .to_string(),
    )
    .unwrap();
    let server = Server::start(&cfg);

    let out = server.run(&["--json", "submit", job.to_str().unwrap(), "--wait", "--timeout", "60"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let status: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(status["status"], "COMPLETED");
    assert_eq!(status["user"], "carol");
    let id = status["job_id"].as_str().unwrap();

    let out = server.run(&["--json", "results", id]);
    assert!(out.status.success());
    let results: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let counts = &results["items"][0]["counts"];
    assert_eq!(counts["shots"], 256);
    let support: u64 = ["00", "11"].iter().map(|k| counts["counts"][k].as_u64().unwrap_or(0)).sum();
    assert_eq!(support, 256);

    let file = dir.path().join("results.json");
    assert!(server.run(&["results", id, "--out", file.to_str().unwrap()]).status.success());
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(saved, results);

    let out = server.run(&["status", id]);
    assert!(stdout(&out).contains("COMPLETED"), "{}", stdout(&out));
    let out = server.run(&["results", id]);
    assert!(stdout(&out).contains("<Z> = 1.0000"), "{}", stdout(&out));

    assert_eq!(server.interrupt().code(), Some(0));
    assert!(dir.path().join("state").join("events.log").exists());
}

#[test]
fn backends_calibration_reserve_cancel() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(&write_config(dir.path(), FLEET));

    let out = server.run(&["backends"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("sim-a") && text.contains("sim-b"), "{text}");

    let out = server.run(&["--json", "calibration", "sim-b", "--refresh"]);
    let cal: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cal["qubits"].as_array().unwrap().len(), 5);

    let out = server.run(&["reserve", "sim-b", "--start", "2031-05-01T09:00:00Z", "--minutes", "20"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("res-"));
    let out = server.run(&["reserve", "sim-b", "--start", "2031-05-01T09:10:00Z"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("CONFLICT:"), "{}", stderr(&out));

    let out = server.run(&["cancel", "job-00000042"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("UNKNOWN_JOB:"));
}

#[test]
fn failed_submission_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(&write_config(dir.path(), FLEET));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "single", "backend_name": "sim-a", "items": [], "extra": 1}"#).unwrap();
    let out = server.run(&["submit", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("SCHEMA_VIOLATION:"), "{}", stderr(&out));

    let out = std::process::Command::new(common::child::bin())
        .args(["backends"])
        .env("QRUNTIME_URL", &server.url)
        .env("QRUNTIME_TOKEN", "wrong")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("AUTH_FAILED:"));
}

#[test]
fn serve_requires_a_token_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bare.toml");
    std::fs::write(&cfg, "port = 0\n").unwrap();
    let out = std::process::Command::new(common::child::bin())
        .args(["serve", "--config", cfg.to_str().unwrap()])
        .env_remove("QRUNTIME_TOKEN_FILE")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("token_file"));
}
