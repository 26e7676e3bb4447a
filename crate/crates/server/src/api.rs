//! The `/v1` HTTP routes.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use chrono::TimeDelta;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::oneshot;

use qruntime_core::platform::{Platform, PlatformError};
use qruntime_core::scheduler::{JobStatus, SchedulerError};

use crate::auth::{bearer, TokenVerifier};
use crate::schemas;
use crate::wire::*;

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Platform>,
    pub verifier: Arc<dyn TokenVerifier>,
}

/// An error response: HTTP status plus `{code, message, details}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody::new(code, message),
        }
    }

    fn auth(message: &str) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "AUTH_FAILED", message)
    }

    fn schema(e: serde_json::Error) -> Self {
        let mut err = Self::new(StatusCode::BAD_REQUEST, "SCHEMA_VIOLATION", e.to_string());
        err.body.details = serde_json::json!({ "line": e.line(), "column": e.column() });
        err
    }
}

/// HTTP status of a stable error code.
pub fn status_of(code: &str) -> StatusCode {
    match code {
        "AUTH_FAILED" => StatusCode::UNAUTHORIZED,
        "SCHEMA_VIOLATION" => StatusCode::BAD_REQUEST,
        "UNKNOWN_BACKEND" | "UNKNOWN_JOB" | "UNKNOWN_SESSION" | "UNKNOWN_WORKER" | "UNKNOWN_RESERVATION"
        | "NO_DATA" | "NOT_FOUND" => StatusCode::NOT_FOUND,
        "CAPABILITY_MISSING" | "CONFLICT" | "NOT_READY" | "INVALID_STATE" | "NO_CAPABLE_BACKEND" => {
            StatusCode::CONFLICT
        }
        "USER_LIMIT_EXCEEDED" => StatusCode::TOO_MANY_REQUESTS,
        "ADAPTER_UNAVAILABLE" => StatusCode::SERVICE_UNAVAILABLE,
        "TIMEOUT" => StatusCode::GATEWAY_TIMEOUT,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<PlatformError> for ApiError {
    fn from(e: PlatformError) -> Self {
        let code = e.code();
        let mut err = ApiError::new(status_of(code), code, e.to_string());
        if let PlatformError::Scheduler(SchedulerError::Conflict { reservation_id }) = &e {
            err.body.details = serde_json::json!({ "reservation_id": reservation_id });
        }
        err
    }
}

impl From<SchedulerError> for ApiError {
    fn from(e: SchedulerError) -> Self {
        PlatformError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// The authenticated caller.
pub struct User(pub String);

impl FromRequestParts<AppState> for User {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get(header::AUTHORIZATION)
            .ok_or_else(|| ApiError::auth("missing bearer token"))?
            .to_str()
            .map_err(|_| ApiError::auth("malformed authorization header"))?;
        let token = bearer(header).ok_or_else(|| ApiError::auth("malformed authorization header"))?;
        state
            .verifier
            .verify(token)
            .map(User)
            .ok_or_else(|| ApiError::auth("invalid token"))
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(ApiError::schema)
}

fn created<T: Serialize>(body: T) -> Response {
    (StatusCode::CREATED, Json(body)).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/jobs", post(submit))
        .route("/v1/jobs/{id}", get(job_status).delete(cancel_job))
        .route("/v1/jobs/{id}/results", get(job_results))
        .route("/v1/sessions", post(open_session))
        .route("/v1/sessions/{id}", delete(close_session))
        .route("/v1/reservations", post(reserve))
        .route("/v1/reservations/{id}", delete(cancel_reservation))
        .route("/v1/backends", get(backends))
        .route("/v1/backends/{id}/calibration", get(calibration))
        .route("/v1/workers/register", post(register_worker))
        .route("/v1/workers/{id}/heartbeat", put(heartbeat))
        .route("/v1/schemas/{name}", get(schema))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such route") })
        .with_state(state)
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn submit(State(s): State<AppState>, User(user): User, body: Bytes) -> ApiResult<Response> {
    let mut descriptor: WireJobDescriptor = parse(&body)?;
    descriptor.user = user;
    let job_id = s.platform.submit(descriptor)?;
    Ok(created(SubmitResponse { job_id }))
}

/// Jobs of other users are reported as unknown.
fn owned(s: &AppState, user: &str, job_id: &str) -> ApiResult<()> {
    let job = s.platform.job(job_id)?;
    if job.descriptor.user != user {
        return Err(SchedulerError::UnknownJob(job_id.to_string()).into());
    }
    Ok(())
}

async fn job_status(State(s): State<AppState>, User(user): User, Path(id): Path<String>) -> ApiResult<Json<WireJobStatus>> {
    owned(&s, &user, &id)?;
    let (job, eta) = s.platform.job_with_eta(&id)?;
    Ok(Json(WireJobStatus::new(&job, eta)))
}

async fn job_results(State(s): State<AppState>, User(user): User, Path(id): Path<String>) -> ApiResult<Json<WireJobResults>> {
    owned(&s, &user, &id)?;
    let job = s.platform.job(&id)?;
    if !job.status.is_terminal() {
        return Err(SchedulerError::NotReady(id).into());
    }
    let (items, hybrid) = match job.results {
        Some(r) => (r.items, r.hybrid),
        None => (job.partial, None),
    };
    Ok(Json(WireJobResults {
        job_id: id,
        status: job.status,
        items,
        hybrid,
    }))
}

async fn cancel_job(State(s): State<AppState>, User(user): User, Path(id): Path<String>) -> ApiResult<Json<CancelResponse>> {
    owned(&s, &user, &id)?;
    let status: JobStatus = s.platform.cancel(&id)?;
    Ok(Json(CancelResponse { job_id: id, status }))
}

async fn open_session(State(s): State<AppState>, User(user): User, body: Bytes) -> ApiResult<Response> {
    let req: SessionRequest = parse(&body)?;
    let session = s
        .platform
        .open_session(&user, &req.backend_name, req.ttl_seconds.map(TimeDelta::seconds))?;
    Ok(created(session))
}

async fn close_session(State(s): State<AppState>, User(user): User, Path(id): Path<String>) -> ApiResult<StatusCode> {
    s.platform.close_session(&id, &user)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn reserve(State(s): State<AppState>, User(user): User, body: Bytes) -> ApiResult<Response> {
    let req: ReservationRequest = parse(&body)?;
    let r = s
        .platform
        .reserve(&req.backend_name, &user, req.start, req.duration_minutes.map(TimeDelta::minutes))?;
    Ok(created(r))
}

async fn cancel_reservation(State(s): State<AppState>, User(user): User, Path(id): Path<String>) -> ApiResult<StatusCode> {
    s.platform.cancel_reservation(&id, &user)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn backends(State(s): State<AppState>, _: User) -> Json<BackendList> {
    Json(BackendList {
        backends: s.platform.backends(),
    })
}

async fn calibration(
    State(s): State<AppState>,
    _: User,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<WireCalibration>> {
    let refresh = match q.get("refresh").map(String::as_str) {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") | Some("") => true,
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "SCHEMA_VIOLATION",
                format!("refresh must be true or false, got `{other}`"),
            ))
        }
    };
    Ok(Json(s.platform.calibration(&id, refresh)?))
}

async fn register_worker(State(s): State<AppState>, _: User, body: Bytes) -> ApiResult<Response> {
    let req: WireWorkerRegistration = parse(&body)?;
    let worker_id = req.worker_id.clone();
    s.platform.register_worker(req.into_worker())?;
    Ok(created(ack(&s, &worker_id)?))
}

async fn heartbeat(State(s): State<AppState>, _: User, Path(id): Path<String>) -> ApiResult<Json<WorkerAck>> {
    s.platform.heartbeat(&id)?;
    Ok(Json(ack(&s, &id)?))
}

fn ack(s: &AppState, worker_id: &str) -> ApiResult<WorkerAck> {
    s.platform
        .with_scheduler(|sched| sched.state().workers.get(worker_id).map(|w| w.last_heartbeat))
        .map(|last_heartbeat| WorkerAck {
            worker_id: worker_id.to_string(),
            last_heartbeat,
        })
        .ok_or_else(|| SchedulerError::UnknownWorker(worker_id.to_string()).into())
}

async fn schema(_: User, Path(name): Path<String>) -> ApiResult<Response> {
    let name = name.trim_end_matches(".json");
    let text = schemas::get(name)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no schema `{name}`")))?;
    Ok(([(header::CONTENT_TYPE, "application/schema+json")], text).into_response())
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// A server running on its own runtime thread; stops on drop.
pub struct ServerHandle {
    pub addr: SocketAddr,
    pub platform: Arc<Platform>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        let result = match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        };
        self.platform.shutdown();
        result
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves `platform` in the background.
pub fn spawn(platform: Arc<Platform>, verifier: Arc<dyn TokenVerifier>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let state = AppState {
        platform: platform.clone(),
        verifier,
    };
    let thread = std::thread::Builder::new().name("http".into()).spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            serve(listener, state, async {
                let _ = rx.await;
            })
            .await
        })
    })?;
    Ok(ServerHandle {
        addr,
        platform,
        stop: Some(tx),
        thread: Some(thread),
    })
}
