//! The `qruntime` command line.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use serde::Serialize;

use qruntime_core::platform::Platform;
use qruntime_core::scheduler::{JobKind, JobStatus};

use crate::api;
use crate::auth::StaticTokens;
use crate::client::{Client, ClientError};
use crate::config::ServiceConfig;
use crate::wire::{WireJobResults, WireJobStatus};

#[derive(Debug, Parser)]
#[command(name = "qruntime", version, about = "Self-hosted quantum job runtime")]
pub struct Cli {
    /// Base URL of the service.
    #[arg(long, global = true, env = "QRUNTIME_URL", default_value = "http://127.0.0.1:8080")]
    pub url: String,
    /// Bearer token.
    #[arg(long, global = true, env = "QRUNTIME_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Print raw JSON responses.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the service in the foreground.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured port; 0 picks a free one.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Submit a job descriptor (JSON file, `-` for stdin).
    Submit {
        file: PathBuf,
        /// Block until the job finishes; exits 2 unless it completed.
        #[arg(long)]
        wait: bool,
        /// Seconds to wait with `--wait`.
        #[arg(long, default_value_t = 600)]
        timeout: u64,
    },
    Status {
        job_id: String,
    },
    Results {
        job_id: String,
        /// Write the results JSON to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Cancel {
        job_id: String,
    },
    /// List backends with queue depth and calibration age.
    Backends,
    Calibration {
        backend: String,
        /// Recalibrate before answering.
        #[arg(long)]
        refresh: bool,
    },
    /// Book exclusive access to a backend.
    Reserve {
        backend: String,
        /// RFC 3339 start time.
        #[arg(long)]
        start: DateTime<Utc>,
        #[arg(long, default_value_t = 30)]
        minutes: i64,
    },
}

#[derive(Debug)]
pub struct Failure(pub String);

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure(match e {
            ClientError::Api { body, .. } => format!("{}: {}", body.code, body.message),
            other => format!("{}: {other}", other.code()),
        })
    }
}

pub type CliResult = Result<ExitCode, Failure>;

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    let client = || Client::new(&cli.url, cli.token.clone());
    match &cli.command {
        Command::Serve { config, port } => serve(config.clone(), *port),
        Command::Submit { file, wait, timeout } => {
            let text = if file.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin()).map_err(|e| Failure(format!("IO: {e}")))?
            } else {
                std::fs::read_to_string(file).map_err(|e| Failure(format!("IO: {}: {e}", file.display())))?
            };
            let job: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure(format!("SCHEMA_VIOLATION: {e}")))?;
            let c = client();
            let id = c.submit_json(&job)?;
            if !wait {
                emit(cli.json, &serde_json::json!({ "job_id": id }), || id.clone());
                return Ok(ExitCode::SUCCESS);
            }
            let s = c.wait(&id, Duration::from_secs(*timeout), Duration::from_millis(250))?;
            emit(cli.json, &s, || describe(&s));
            Ok(if s.status == JobStatus::Completed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Status { job_id } => {
            let s = client().status(job_id)?;
            emit(cli.json, &s, || describe(&s));
            Ok(ExitCode::SUCCESS)
        }
        Command::Results { job_id, out } => {
            let r = client().results(job_id)?;
            match out {
                Some(path) => {
                    let text = serde_json::to_string_pretty(&r).expect("serializable");
                    std::fs::write(path, text + "\n").map_err(|e| Failure(format!("IO: {}: {e}", path.display())))?;
                }
                None => emit(cli.json, &r, || summarize(&r)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Cancel { job_id } => {
            let r = client().cancel(job_id)?;
            emit(cli.json, &r, || format!("{} {}", r.job_id, r.status));
            Ok(ExitCode::SUCCESS)
        }
        Command::Backends => {
            let list = client().backends()?;
            emit(cli.json, &list, || {
                let mut out = format!("{:<16} {:>6} {:>9} {:>8}  CALIBRATED", "BACKEND", "QUBITS", "AVAILABLE", "PENDING");
                for b in &list.backends {
                    let ts = b.calibration_ts.map(|t| t.to_rfc3339()).unwrap_or_else(|| "-".into());
                    out += &format!(
                        "\n{:<16} {:>6} {:>9} {:>8}  {ts}",
                        b.backend_id, b.capabilities.num_qubits, b.available, b.pending_jobs
                    );
                }
                out
            });
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibration { backend, refresh } => {
            let snap = client().calibration(backend, *refresh)?;
            emit(cli.json, &snap, || {
                let mut out = format!("{} at {}", snap.backend_id, snap.timestamp.to_rfc3339());
                for (i, q) in snap.qubits.iter().enumerate() {
                    out += &format!(
                        "\nq{i}: T1 {:.1} us  T2 {:.1} us  readout {:.4}",
                        q.t1_us, q.t2_us, q.readout_error
                    );
                }
                out
            });
            Ok(ExitCode::SUCCESS)
        }
        Command::Reserve { backend, start, minutes } => {
            let r = client().reserve(backend, *start, *minutes)?;
            emit(cli.json, &r, || r.reservation_id.clone());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
    } else {
        println!("{}", human());
    }
}

fn describe(s: &WireJobStatus) -> String {
    let unit = if s.kind == JobKind::Hybrid { "iterations" } else { "items" };
    let mut out = format!(
        "{} {} on {} ({}/{} {unit})",
        s.job_id, s.status, s.backend_id, s.progress.completed, s.progress.total
    );
    if let Some(eta) = s.eta_seconds {
        out += &format!(", starts in ~{eta:.1}s");
    }
    if let Some(e) = &s.error {
        out += &format!("\nerror: {e}");
    }
    out
}

fn summarize(r: &WireJobResults) -> String {
    let mut out = format!("{} {}", r.job_id, r.status);
    for item in &r.items {
        let counts: Vec<String> = item.counts.counts.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        out += &format!(
            "\nitem {}: <Z> = {:.4} +/- {:.4}  {{{}}}",
            item.index,
            item.expectation.value,
            item.expectation.variance.sqrt(),
            counts.join(" ")
        );
    }
    if let Some(h) = &r.hybrid {
        out += &format!(
            "\nbest {:.6} after {} iterations ({} compiles, {} bindings)",
            h.best_value, h.iterations, h.compile_count, h.bindings
        );
    }
    out
}

fn serve(config: Option<PathBuf>, port: Option<u16>) -> CliResult {
    let mut cfg = ServiceConfig::load(config.as_deref()).map_err(|e| Failure(format!("CONFIG: {e}")))?;
    if let Some(p) = port {
        cfg.port = p;
    }
    let token_file = cfg
        .token_file
        .clone()
        .ok_or_else(|| Failure("CONFIG: token_file is required".into()))?;
    let tokens = StaticTokens::from_file(&token_file).map_err(|e| Failure(format!("CONFIG: {e}")))?;
    let ip: IpAddr = cfg
        .bind
        .parse()
        .map_err(|_| Failure(format!("CONFIG: invalid bind address {:?}", cfg.bind)))?;
    let platform_cfg = cfg.platform().map_err(|e| Failure(format!("CONFIG: {e}")))?;
    let platform = Platform::start(platform_cfg).map_err(|e| Failure(format!("{}: {e}", e.code())))?;
    let handle = api::spawn(Arc::new(platform), Arc::new(tokens), SocketAddr::new(ip, cfg.port))
        .map_err(|e| Failure(format!("IO: {e}")))?;
    println!("qruntime listening on {}", handle.url());
    let _ = std::io::stdout().flush();

    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure(format!("IO: {e}")))?;
    rt.block_on(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    tracing::info!("shutting down");
    handle.stop().map_err(|e| Failure(format!("IO: {e}")))?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn command_line_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_reserve() {
        let cli = Cli::try_parse_from([
            "qruntime",
            "--json",
            "reserve",
            "sim-ring-7",
            "--start",
            "2030-01-01T10:00:00Z",
            "--minutes",
            "15",
        ])
        .unwrap();
        assert!(cli.json);
        match cli.command {
            Command::Reserve { backend, minutes, .. } => assert_eq!((backend.as_str(), minutes), ("sim-ring-7", 15)),
            other => panic!("{other:?}"),
        }
    }
}
