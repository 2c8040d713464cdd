//! Scripted mock of the three annotation services.
//!
//! Fixtures are JSON:
//!
//! ```json
//! {
//!   "aesthetic": {
//!     "default": [{"status": 503}, {"json": {"score": 7.2}}],
//!     "by_image": {"<content id>": [{"json": {"score": 4.0}}]}
//!   },
//!   "caption": {"default": [{"json": {"short": "a", "detailed": "a b"}}]},
//!   "ground": {"default": [{"json": {"boxes": []}}]}
//! }
//! ```
//!
//! Each script is consumed in order per (route, image); the last entry repeats.
//! Images are keyed by [`content_id`] of the decoded `image` field, so results
//! do not depend on request order when every image has its own script.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::oneshot;

use crate::pipeline::content_id;

pub const ROUTES: [&str; 3] = ["aesthetic", "caption", "ground"];

#[derive(Debug, Error)]
pub enum MockError {
    #[error("reading fixtures {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing fixtures: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("binding mock server: {0}")]
    Bind(std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedResponse {
    #[serde(default = "ok")]
    pub status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<Value>,
    /// Raw body, used when `json` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub delay_ms: u64,
}

fn ok() -> u16 {
    200
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl ScriptedResponse {
    pub fn json(value: Value) -> Self {
        Self {
            status: 200,
            json: Some(value),
            text: None,
            delay_ms: 0,
        }
    }

    pub fn text(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            json: None,
            text: Some(body.into()),
            delay_ms: 0,
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            json: None,
            text: None,
            delay_ms: 0,
        }
    }

    pub fn with_delay(mut self, ms: u64) -> Self {
        self.delay_ms = ms;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteScript {
    pub default: Vec<ScriptedResponse>,
    pub by_image: BTreeMap<String, Vec<ScriptedResponse>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fixtures {
    pub aesthetic: RouteScript,
    pub caption: RouteScript,
    pub ground: RouteScript,
}

impl Fixtures {
    pub fn load(path: &Path) -> Result<Self, MockError> {
        let text = std::fs::read_to_string(path).map_err(|source| MockError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn route(&self, name: &str) -> Option<&RouteScript> {
        match name {
            "aesthetic" => Some(&self.aesthetic),
            "caption" => Some(&self.caption),
            "ground" => Some(&self.ground),
            _ => None,
        }
    }

    pub fn route_mut(&mut self, name: &str) -> &mut RouteScript {
        match name {
            "aesthetic" => &mut self.aesthetic,
            "caption" => &mut self.caption,
            "ground" => &mut self.ground,
            other => panic!("unknown route {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedRequest {
    pub route: String,
    /// Content id of the posted image, empty when the body had none.
    pub image_id: String,
    pub status: u16,
}

#[derive(Default)]
struct Shared {
    fixtures: Fixtures,
    cursors: Mutex<BTreeMap<(String, String), usize>>,
    log: Mutex<Vec<LoggedRequest>>,
}

impl Shared {
    fn next(&self, route: &str, image_id: &str) -> Option<ScriptedResponse> {
        let script = self.fixtures.route(route)?;
        let (key, list) = match script.by_image.get(image_id) {
            Some(list) if !list.is_empty() => (image_id.to_string(), list),
            _ => (String::new(), &script.default),
        };
        if list.is_empty() {
            return None;
        }
        let mut cursors = self.cursors.lock().unwrap();
        let cursor = cursors.entry((route.to_string(), key)).or_insert(0);
        let resp = list[(*cursor).min(list.len() - 1)].clone();
        *cursor += 1;
        Some(resp)
    }
}

async fn handle(State(shared): State<Arc<Shared>>, UrlPath(route): UrlPath<String>, body: Bytes) -> Response {
    let image_id = serde_json::from_slice::<Value>(&body)
        .ok()
        .and_then(|v| v.get("image").and_then(Value::as_str).map(str::to_owned))
        .and_then(|b64| base64::engine::general_purpose::STANDARD.decode(b64).ok())
        .map(|bytes| content_id(&bytes))
        .unwrap_or_default();
    let scripted = shared.next(&route, &image_id);
    let status = scripted.as_ref().map_or(404, |r| r.status);
    shared.log.lock().unwrap().push(LoggedRequest {
        route: route.clone(),
        image_id,
        status,
    });
    let Some(r) = scripted else {
        return (StatusCode::NOT_FOUND, format!("no script for route {route}")).into_response();
    };
    if r.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(r.delay_ms)).await;
    }
    let code = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    match (r.json, r.text) {
        (Some(v), _) => (code, Json(v)).into_response(),
        (None, Some(t)) => (code, t).into_response(),
        (None, None) => code.into_response(),
    }
}

async fn request_log(State(shared): State<Arc<Shared>>) -> Json<Vec<LoggedRequest>> {
    Json(shared.log.lock().unwrap().clone())
}

fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/_log", get(request_log))
        .route("/{route}", post(handle))
        .with_state(shared)
}

/// A running mock server. Shuts down when dropped.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl MockServer {
    /// Binds `127.0.0.1:port` (0 picks a free port) and serves on a background thread.
    pub fn start(fixtures: Fixtures, port: u16) -> Result<Self, MockError> {
        let shared = Arc::new(Shared {
            fixtures,
            ..Shared::default()
        });
        let std_listener =
            std::net::TcpListener::bind(("127.0.0.1", port)).map_err(MockError::Bind)?;
        std_listener.set_nonblocking(true).map_err(MockError::Bind)?;
        let addr = std_listener.local_addr().map_err(MockError::Bind)?;
        let (tx, rx) = oneshot::channel::<()>();
        let app = router(Arc::clone(&shared));
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(MockError::Bind)?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(std_listener) {
                    Ok(l) => l,
                    Err(e) => {
                        log::error!("mock server: {e}");
                        return;
                    }
                };
                let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                    let _ = rx.await;
                });
                if let Err(e) = serve.await {
                    log::error!("mock server: {e}");
                }
            });
        });
        Ok(Self {
            addr,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.shared.log.lock().unwrap().clone()
    }

    pub fn request_count(&self, route: &str) -> usize {
        self.shared
            .log
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.route == route)
            .count()
    }

    /// Blocks until the server thread exits (it never does unless dropped elsewhere).
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
