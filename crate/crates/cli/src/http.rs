//! JSON over HTTP. Every handler locks the one [`Engine`]; the stream
//! endpoint replays the backlog and then follows new items.

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use butler_core::executor::TaskResult;
use butler_core::service::{CommandRequest, Engine, EngineError, OpenSession};
use butler_core::sim::WorldEvent;
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Mutex<Engine>>,
    /// Current stream length, bumped after every mutation.
    len: watch::Sender<usize>,
}

impl AppState {
    pub fn new(engine: Engine) -> AppState {
        let (len, _) = watch::channel(engine.stream_len());
        AppState {
            engine: Arc::new(Mutex::new(engine)),
            len,
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn publish(&self, engine: &Engine) {
        self.len.send_replace(engine.stream_len());
    }

    /// Advances the world `n` ticks and returns tasks that finished.
    pub fn tick(&self, n: u64) -> Vec<TaskResult> {
        let mut e = self.lock();
        let mut out = Vec::new();
        for _ in 0..n {
            out.extend(e.tick());
        }
        self.publish(&e);
        out
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::UnknownSession(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(code, e.to_string())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", post(open_session))
        .route("/session/{id}/command", post(command))
        .route("/session/{id}/plan", get(plan))
        .route("/world", get(world))
        .route("/world/event", post(event))
        .route("/kb", get(kb))
        .route("/stream", get(stream))
        .route("/trace", get(trace))
        .route("/tick", post(tick))
        .with_state(state)
}

async fn open_session(State(s): State<AppState>, body: Option<Json<OpenSession>>) -> Response {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let info = s.lock().open_session(req);
    (StatusCode::CREATED, Json(info)).into_response()
}

async fn command(
    State(s): State<AppState>,
    Path(id): Path<u64>,
    Json(req): Json<CommandRequest>,
) -> Result<Response, ApiError> {
    let mut e = s.lock();
    let r = e.handle_command(id, &req)?;
    s.publish(&e);
    Ok(Json(r).into_response())
}

async fn plan(State(s): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    Ok(Json(s.lock().plan_view(id)?).into_response())
}

async fn world(State(s): State<AppState>) -> Response {
    Json(s.lock().world().clone()).into_response()
}

async fn event(State(s): State<AppState>, Json(ev): Json<WorldEvent>) -> Result<Response, ApiError> {
    s.lock().inject_event(ev)?;
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "ack": true }))).into_response())
}

async fn kb(State(s): State<AppState>) -> Response {
    let text = s.lock().kb().to_json();
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn trace(State(s): State<AppState>) -> Response {
    let text = s.lock().trace().to_ndjson();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response()
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    #[serde(default)]
    from: usize,
    /// Keep the connection open for new items (default true).
    #[serde(default = "yes")]
    follow: bool,
}

fn yes() -> bool {
    true
}

fn lines(engine: &Engine, from: usize) -> (String, usize) {
    let items = engine.stream_since(from);
    let mut out = String::new();
    for i in items {
        out.push_str(&serde_json::to_string(i).expect("stream items serialize"));
        out.push('\n');
    }
    (out, from + items.len())
}

async fn stream(State(s): State<AppState>, Query(q): Query<StreamQuery>) -> Response {
    let rx = s.len.subscribe();
    let body = if q.follow {
        let chunks = futures::stream::unfold((s, rx, q.from), |(s, mut rx, from)| async move {
            loop {
                let (text, next) = lines(&s.lock(), from);
                if !text.is_empty() {
                    return Some((Ok::<_, Infallible>(text), (s, rx, next)));
                }
                rx.changed().await.ok()?;
            }
        });
        Body::from_stream(chunks)
    } else {
        Body::from(lines(&s.lock(), q.from).0)
    };
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

#[derive(Debug, Deserialize)]
struct TickQuery {
    #[serde(default = "one")]
    n: u64,
    /// Tick until no task is queued or running, at most `n` ticks.
    #[serde(default)]
    until_idle: bool,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Serialize)]
struct TickReply {
    tick: u64,
    finished: Vec<TaskResult>,
}

async fn tick(State(s): State<AppState>, Query(q): Query<TickQuery>) -> Response {
    let finished = if q.until_idle {
        let mut e = s.lock();
        let r = e.run_until_idle(q.n);
        s.publish(&e);
        r
    } else {
        s.tick(q.n)
    };
    let tick = s.lock().simulator().tick();
    Json(TickReply { tick, finished }).into_response()
}

/// Advances the world on a fixed period in the background.
pub fn spawn_ticker(state: AppState, period: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut iv = tokio::time::interval(period);
        loop {
            iv.tick().await;
            state.tick(1);
        }
    })
}
