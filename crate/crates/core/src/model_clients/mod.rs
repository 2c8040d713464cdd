//! HTTP clients for the three annotation services and a scripted mock server.
//!
//! Wire protocol: `POST {base_url}/aesthetic|caption|ground` with a JSON body
//! `{"image": "<base64>", ...}`. Responses are `{"score": f}`,
//! `{"short": s, "detailed": s}` and
//! `{"boxes": [{"x0", "y0", "x1", "y1", "phrase", "confidence"}]}`.
//!
//! Transport errors and 5xx responses are retried with exponential backoff;
//! 4xx responses are terminal.

pub mod mock;

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::conditioning::BoundingBox;

/// Ceiling for a single backoff sleep.
pub const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("{route} unavailable after {attempts} attempt(s): {last_error}")]
    RemoteUnavailable {
        route: &'static str,
        attempts: u32,
        last_error: String,
    },
    #[error("{route} protocol error: {message}")]
    Protocol { route: &'static str, message: String },
    #[error("{route} rejected request with status {status}: {body}")]
    Rejected {
        route: &'static str,
        status: u16,
        body: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl ClientError {
    fn protocol(route: &'static str, message: impl Into<String>) -> Self {
        Self::Protocol {
            route,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceEndpoint {
    pub base_url: String,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    /// Static bearer token sent as `Authorization: Bearer ...`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bearer_token: Option<String>,
    /// Concurrent requests allowed against this endpoint.
    pub max_concurrent: usize,
}

impl Default for ServiceEndpoint {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080".to_string(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            backoff_base: Duration::from_millis(200),
            bearer_token: None,
            max_concurrent: 8,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl ServiceEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            ..Self::default()
        }
    }

    /// Sleep before retry `k` (0-based): `backoff_base * 2^k`, capped.
    pub fn backoff_delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.backoff_base.saturating_mul(factor).min(MAX_BACKOFF)
    }

    /// Every sleep a single call may perform, in order.
    pub fn backoff_schedule(&self) -> Vec<Duration> {
        (0..self.max_retries).map(|k| self.backoff_delay(k)).collect()
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), route)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionPair {
    pub short: String,
    pub detailed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedBox {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub phrase: String,
    pub confidence: f64,
}

pub const DEFAULT_BOX_THRESHOLD: f64 = 0.35;

/// Counting semaphore bounding in-flight requests per endpoint.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Client for one service endpoint. Cheap to share across threads.
pub struct ServiceClient {
    endpoint: ServiceEndpoint,
    agent: ureq::Agent,
    gate: Gate,
}

impl std::fmt::Debug for ServiceClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServiceClient")
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(ClientError),
}

impl ServiceClient {
    pub fn new(endpoint: ServiceEndpoint) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(endpoint.max_concurrent);
        Self {
            endpoint,
            agent,
            gate,
        }
    }

    pub fn endpoint(&self) -> &ServiceEndpoint {
        &self.endpoint
    }

    fn attempt(&self, route: &'static str, body: &Value) -> Attempt {
        let _permit = self.gate.acquire();
        let mut req = self.agent.post(&self.endpoint.url(route));
        if let Some(token) = &self.endpoint.bearer_token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        match status {
            200..=299 => Attempt::Done(text),
            500..=599 => Attempt::Retry(format!("status {status}")),
            _ => Attempt::Fatal(ClientError::Rejected {
                route,
                status,
                body: text.chars().take(200).collect(),
            }),
        }
    }

    /// One logical call: `1 + max_retries` attempts at most.
    fn call(&self, route: &'static str, body: Value) -> Result<Value, ClientError> {
        let attempts = 1 + self.endpoint.max_retries;
        let mut last_error = String::new();
        for k in 0..attempts {
            if k > 0 {
                std::thread::sleep(self.endpoint.backoff_delay(k - 1));
            }
            match self.attempt(route, &body) {
                Attempt::Done(text) => {
                    return serde_json::from_str(&text).map_err(|e| {
                        ClientError::protocol(route, format!("response is not JSON ({e}): {text:.60}"))
                    })
                }
                Attempt::Retry(msg) => {
                    log::debug!("{route} attempt {} failed: {msg}", k + 1);
                    last_error = msg;
                }
                Attempt::Fatal(e) => return Err(e),
            }
        }
        Err(ClientError::RemoteUnavailable {
            route,
            attempts,
            last_error,
        })
    }

    pub fn score_aesthetic(&self, image_bytes: &[u8]) -> Result<f64, ClientError> {
        const ROUTE: &str = "aesthetic";
        let v = self.call(ROUTE, json!({ "image": encode(image_bytes) }))?;
        let score = v
            .get("score")
            .ok_or_else(|| ClientError::protocol(ROUTE, "missing field `score`"))?;
        score
            .as_f64()
            .ok_or_else(|| ClientError::protocol(ROUTE, format!("field `score` is not a number: {score}")))
    }

    pub fn caption(&self, image_bytes: &[u8]) -> Result<CaptionPair, ClientError> {
        const ROUTE: &str = "caption";
        let v = self.call(ROUTE, json!({ "image": encode(image_bytes) }))?;
        let field = |name: &str| -> Result<String, ClientError> {
            match v.get(name) {
                None => Err(ClientError::protocol(ROUTE, format!("missing field `{name}`"))),
                Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
                Some(Value::String(_)) => {
                    Err(ClientError::protocol(ROUTE, format!("field `{name}` is empty")))
                }
                Some(other) => Err(ClientError::protocol(
                    ROUTE,
                    format!("field `{name}` is not a string: {other}"),
                )),
            }
        };
        Ok(CaptionPair {
            short: field("short")?,
            detailed: field("detailed")?,
        })
    }

    /// Boxes with `confidence >= box_threshold`, clipped to the unit square.
    /// Boxes that are empty after clipping are dropped with a warning.
    pub fn ground(
        &self,
        image_bytes: &[u8],
        detailed_caption: &str,
        box_threshold: f64,
    ) -> Result<Vec<GroundedBox>, ClientError> {
        const ROUTE: &str = "ground";
        if !(0.0..=1.0).contains(&box_threshold) {
            return Err(ClientError::InvalidArgument(format!(
                "box_threshold {box_threshold} outside [0, 1]"
            )));
        }
        let v = self.call(
            ROUTE,
            json!({
                "image": encode(image_bytes),
                "caption": detailed_caption,
                "box_threshold": box_threshold,
            }),
        )?;
        let raw = v
            .get("boxes")
            .ok_or_else(|| ClientError::protocol(ROUTE, "missing field `boxes`"))?
            .as_array()
            .ok_or_else(|| ClientError::protocol(ROUTE, "field `boxes` is not an array"))?;
        let mut out = Vec::with_capacity(raw.len());
        for (i, b) in raw.iter().enumerate() {
            let num = |name: &str| -> Result<f64, ClientError> {
                b.get(name).and_then(Value::as_f64).ok_or_else(|| {
                    ClientError::protocol(ROUTE, format!("boxes[{i}].{name} missing or not a number"))
                })
            };
            let (x0, y0, x1, y1) = (num("x0")?, num("y0")?, num("x1")?, num("y1")?);
            let confidence = num("confidence")?;
            let phrase = b
                .get("phrase")
                .and_then(Value::as_str)
                .ok_or_else(|| ClientError::protocol(ROUTE, format!("boxes[{i}].phrase missing or not a string")))?
                .to_string();
            if !(0.0..=1.0).contains(&confidence) {
                log::warn!("ground: dropping box {i} with confidence {confidence} outside [0, 1]");
                continue;
            }
            if confidence < box_threshold {
                continue;
            }
            let clip = |c: f64| c.clamp(0.0, 1.0);
            match BoundingBox::new(clip(x0), clip(y0), clip(x1), clip(y1)) {
                Ok(bbox) => out.push(GroundedBox {
                    bbox: bbox.with_label(phrase.clone()),
                    phrase,
                    confidence,
                }),
                Err(e) => log::warn!("ground: dropping box {i}: {e}"),
            }
        }
        Ok(out)
    }
}

fn encode(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

/// The three annotation services used by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub aesthetic: ServiceEndpoint,
    pub caption: ServiceEndpoint,
    pub ground: ServiceEndpoint,
}

impl Default for Endpoints {
    fn default() -> Self {
        Self::all(ServiceEndpoint::default())
    }
}

impl Endpoints {
    pub fn all(endpoint: ServiceEndpoint) -> Self {
        Self {
            aesthetic: endpoint.clone(),
            caption: endpoint.clone(),
            ground: endpoint,
        }
    }
}

#[derive(Debug)]
pub struct Clients {
    pub aesthetic: ServiceClient,
    pub caption: ServiceClient,
    pub ground: ServiceClient,
}

impl Clients {
    pub fn new(endpoints: &Endpoints) -> Self {
        Self {
            aesthetic: ServiceClient::new(endpoints.aesthetic.clone()),
            caption: ServiceClient::new(endpoints.caption.clone()),
            ground: ServiceClient::new(endpoints.ground.clone()),
        }
    }
}
