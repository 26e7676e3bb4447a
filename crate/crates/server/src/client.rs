//! Blocking HTTP client for the `/v1` API.

use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use reqwest::blocking::{Client as Http, RequestBuilder};
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::wire::*;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{}: {}", body.code, body.message)]
    Api { status: u16, body: ErrorBody },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("cannot decode response: {0}")]
    Decode(String),
    #[error("TIMEOUT: job {0} still active")]
    Timeout(String),
}

impl ClientError {
    /// The server's error code, or a local one for client-side failures.
    pub fn code(&self) -> &str {
        match self {
            ClientError::Api { body, .. } => &body.code,
            ClientError::Transport(_) => "TRANSPORT",
            ClientError::Decode(_) => "DECODE",
            ClientError::Timeout(_) => "TIMEOUT",
        }
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    token: Option<String>,
    http: Http,
    retries: u32,
    backoff: Duration,
}

impl Client {
    pub fn new(base_url: impl Into<String>, token: Option<String>) -> Self {
        let http = Http::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client");
        Client {
            base: base_url.into().trim_end_matches('/').to_string(),
            token,
            http,
            retries: 3,
            backoff: Duration::from_millis(200),
        }
    }

    /// Attempts after the first when the server cannot be reached.
    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        let rb = self.http.request(method, format!("{}{}", self.base, path));
        match &self.token {
            Some(t) => rb.bearer_auth(t),
            None => rb,
        }
    }

    fn send(&self, build: impl Fn() -> RequestBuilder) -> ClientResult<(StatusCode, Vec<u8>)> {
        let mut attempt = 0;
        loop {
            match build().send() {
                Ok(resp) => {
                    let status = resp.status();
                    let bytes = resp.bytes().map_err(|e| ClientError::Transport(e.to_string()))?;
                    if status.is_success() {
                        return Ok((status, bytes.to_vec()));
                    }
                    let body = serde_json::from_slice::<ErrorBody>(&bytes).unwrap_or_else(|_| {
                        ErrorBody::new("HTTP_ERROR", String::from_utf8_lossy(&bytes).into_owned())
                    });
                    return Err(ClientError::Api {
                        status: status.as_u16(),
                        body,
                    });
                }
                // only connection failures are retried: the request never reached the server
                Err(e) if e.is_connect() && attempt < self.retries => {
                    thread::sleep(self.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(ClientError::Transport(e.to_string())),
            }
        }
    }

    fn call<T: DeserializeOwned>(&self, build: impl Fn() -> RequestBuilder) -> ClientResult<T> {
        let (_, bytes) = self.send(build)?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> ClientResult<T> {
        self.call(|| self.request(Method::GET, path))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> ClientResult<T> {
        self.call(|| self.request(Method::POST, path).json(body))
    }

    pub fn health(&self) -> ClientResult<Health> {
        self.get("/v1/health")
    }

    /// Submits a job and returns its id. The server sets `user` from the token.
    pub fn submit(&self, job: &WireJobDescriptor) -> ClientResult<String> {
        self.post::<_, SubmitResponse>("/v1/jobs", job).map(|r| r.job_id)
    }

    /// Submits a descriptor given as raw JSON, leaving validation to the server.
    pub fn submit_json(&self, job: &serde_json::Value) -> ClientResult<String> {
        self.post::<_, SubmitResponse>("/v1/jobs", job).map(|r| r.job_id)
    }

    pub fn status(&self, job_id: &str) -> ClientResult<WireJobStatus> {
        self.get(&format!("/v1/jobs/{job_id}"))
    }

    pub fn results(&self, job_id: &str) -> ClientResult<WireJobResults> {
        self.get(&format!("/v1/jobs/{job_id}/results"))
    }

    pub fn cancel(&self, job_id: &str) -> ClientResult<CancelResponse> {
        self.call(|| self.request(Method::DELETE, &format!("/v1/jobs/{job_id}")))
    }

    /// Polls until the job is terminal or `timeout` elapses.
    pub fn wait(&self, job_id: &str, timeout: Duration, poll: Duration) -> ClientResult<WireJobStatus> {
        let deadline = Instant::now() + timeout;
        loop {
            let s = self.status(job_id)?;
            if s.status.is_terminal() {
                return Ok(s);
            }
            if Instant::now() >= deadline {
                return Err(ClientError::Timeout(job_id.to_string()));
            }
            thread::sleep(poll);
        }
    }

    pub fn open_session(&self, backend: &str, ttl_seconds: Option<i64>) -> ClientResult<Session> {
        let req = SessionRequest {
            backend_name: backend.into(),
            ttl_seconds,
        };
        self.post("/v1/sessions", &req)
    }

    pub fn close_session(&self, session_id: &str) -> ClientResult<()> {
        self.send(|| self.request(Method::DELETE, &format!("/v1/sessions/{session_id}")))
            .map(|_| ())
    }

    pub fn reserve(&self, backend: &str, start: DateTime<Utc>, minutes: i64) -> ClientResult<Reservation> {
        let req = ReservationRequest {
            backend_name: backend.into(),
            start,
            duration_minutes: Some(minutes),
        };
        self.post("/v1/reservations", &req)
    }

    pub fn cancel_reservation(&self, reservation_id: &str) -> ClientResult<()> {
        self.send(|| self.request(Method::DELETE, &format!("/v1/reservations/{reservation_id}")))
            .map(|_| ())
    }

    pub fn backends(&self) -> ClientResult<BackendList> {
        self.get("/v1/backends")
    }

    pub fn calibration(&self, backend: &str, refresh: bool) -> ClientResult<WireCalibration> {
        self.get(&format!("/v1/backends/{backend}/calibration?refresh={refresh}"))
    }

    pub fn register_worker(&self, reg: &WireWorkerRegistration) -> ClientResult<WorkerAck> {
        self.post("/v1/workers/register", reg)
    }

    pub fn heartbeat(&self, worker_id: &str) -> ClientResult<WorkerAck> {
        self.call(|| self.request(Method::PUT, &format!("/v1/workers/{worker_id}/heartbeat")))
    }

    pub fn schema(&self, name: &str) -> ClientResult<serde_json::Value> {
        self.get(&format!("/v1/schemas/{name}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        let e = ClientError::Api {
            status: 404,
            body: ErrorBody::new("UNKNOWN_JOB", "no job x"),
        };
        assert_eq!(e.code(), "UNKNOWN_JOB");
        assert_eq!(e.to_string(), "UNKNOWN_JOB: no job x");
        assert_eq!(ClientError::Transport("x".into()).code(), "TRANSPORT");
    }

    #[test]
    fn unreachable_server_is_a_transport_error() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        drop(listener);
        let c = Client::new(format!("http://127.0.0.1:{port}/"), None).with_retries(1, Duration::from_millis(1));
        assert_eq!(c.base_url(), format!("http://127.0.0.1:{port}"));
        assert_eq!(c.health().unwrap_err().code(), "TRANSPORT");
    }
}
