//! JSON-over-HTTP plumbing shared by the generation and toxicity clients.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::excerpt;

/// Failure of a single backend call, before retry handling.
#[derive(Debug)]
pub enum CallError {
    /// Timeouts, connection failures and 5xx responses.
    Transient(String),
    /// Everything else; not retried.
    Fatal(Error),
}

impl CallError {
    pub fn contract(msg: impl Into<String>) -> Self {
        CallError::Fatal(Error::Contract(msg.into()))
    }
}

pub type CallResult<T> = std::result::Result<T, CallError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, initial_backoff_ms: 500, max_backoff_ms: 8_000 }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64 << attempt.min(20));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }

    /// Run `call` until it succeeds, fails fatally, or the retry budget is
    /// spent. Exhaustion maps to [`Error::BackendUnavailable`] tagged with
    /// `at` so the run can be resumed there.
    pub fn run<T, F>(&self, at: Option<&str>, mut call: F) -> Result<T>
    where
        F: FnMut() -> CallResult<T>,
    {
        let mut attempt = 0;
        loop {
            match call() {
                Ok(v) => return Ok(v),
                Err(CallError::Fatal(e)) => return Err(e),
                Err(CallError::Transient(msg)) if attempt >= self.max_retries => {
                    return Err(Error::BackendUnavailable {
                        message: format!("{msg} (after {} attempts)", attempt + 1),
                        at: at.map(str::to_string),
                    })
                }
                Err(CallError::Transient(msg)) => {
                    let wait = self.backoff(attempt);
                    log::warn!("transient backend failure: {msg}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }
}

/// `GET /info` response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceInfo {
    pub models: Vec<String>,
    pub toxicity_classifier: ClassifierInfo,
    pub max_batch_size: usize,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    base_url: String,
    auth: Option<(String, String)>,
}

impl HttpClient {
    /// `auth` is a `(header name, value)` pair sent with every request.
    pub fn new(base_url: &str, timeout: Duration, auth: Option<(String, String)>) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self { agent, base_url: base_url.trim_end_matches('/').to_string(), auth }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn post_json<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> CallResult<Resp> {
        let url = format!("{}{path}", self.base_url);
        let mut req = self.agent.post(&url);
        if let Some((name, value)) = &self.auth {
            req = req.header(name.as_str(), value.as_str());
        }
        let payload = serde_json::to_vec(body).map_err(|e| CallError::Fatal(e.into()))?;
        let resp =
            req.header("content-type", "application/json").send(&payload[..]).map_err(|e| transport_error(&url, e))?;
        decode(&url, resp)
    }

    pub fn get_json<Resp: DeserializeOwned>(&self, path: &str) -> CallResult<Resp> {
        let url = format!("{}{path}", self.base_url);
        let mut req = self.agent.get(&url);
        if let Some((name, value)) = &self.auth {
            req = req.header(name.as_str(), value.as_str());
        }
        let resp = req.call().map_err(|e| transport_error(&url, e))?;
        decode(&url, resp)
    }
}

fn transport_error(url: &str, e: ureq::Error) -> CallError {
    match e {
        ureq::Error::BadUri(_) | ureq::Error::Http(_) | ureq::Error::RequireHttpsOnly(_) => {
            CallError::Fatal(Error::Config(format!("{url}: {e}")))
        }
        other => CallError::Transient(format!("{url}: {other}")),
    }
}

fn decode<Resp: DeserializeOwned>(url: &str, mut resp: ureq::http::Response<ureq::Body>) -> CallResult<Resp> {
    let status = resp.status().as_u16();
    let body =
        resp.body_mut().read_to_string().map_err(|e| CallError::Transient(format!("{url}: reading body: {e}")))?;
    match status {
        200 => serde_json::from_str(&body)
            .map_err(|e| CallError::contract(format!("{url}: malformed reply ({e}): {}", excerpt(&body, 200)))),
        500..=599 => Err(CallError::Transient(format!("{url}: HTTP {status}"))),
        _ => Err(CallError::Fatal(Error::BackendUnavailable {
            message: format!("{url}: HTTP {status}: {}", excerpt(&body, 200)),
            at: None,
        })),
    }
}
