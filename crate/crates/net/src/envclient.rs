//! Environment adapter client over HTTP.

use std::time::{Duration, Instant};

use serde_json::json;
use uxpipe_core::harness::{EnvError, Environment};
use uxpipe_core::{Action, Screenshot};

/// Response header carrying the capture time of an observation.
pub const CAPTURED_AT_HEADER: &str = "x-captured-at-ms";

/// Remote environment speaking `GET /observe`, `POST /act`, `POST /reset`.
#[derive(Debug, Clone)]
pub struct HttpEnvironment {
    base_url: String,
    client: reqwest::blocking::Client,
    started: Instant,
}

impl HttpEnvironment {
    pub fn new(base_url: impl Into<String>, timeout_ms: u64) -> Result<Self, EnvError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| EnvError::Unreachable(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
            started: Instant::now(),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url)
    }

    fn check(resp: reqwest::blocking::Response) -> Result<reqwest::blocking::Response, EnvError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let body = resp.text().unwrap_or_default();
        if status.is_client_error() {
            Err(EnvError::Rejected(format!("HTTP {status}: {body}")))
        } else {
            Err(EnvError::Unreachable(format!("HTTP {status}: {body}")))
        }
    }
}

impl Environment for HttpEnvironment {
    fn observe(&mut self) -> Result<Screenshot, EnvError> {
        let resp = self
            .client
            .get(self.url("/observe"))
            .send()
            .map_err(|e| EnvError::Unreachable(e.to_string()))?;
        let resp = Self::check(resp)?;
        let captured = resp
            .headers()
            .get(CAPTURED_AT_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse::<u64>().ok())
            .unwrap_or_else(|| self.started.elapsed().as_millis() as u64);
        let bytes = resp.bytes().map_err(|e| EnvError::Unreachable(e.to_string()))?;
        Screenshot::from_png(&bytes, captured).map_err(|e| EnvError::Protocol(format!("observation is not a PNG: {e}")))
    }

    fn apply(&mut self, action: &Action) -> Result<(), EnvError> {
        let resp = self
            .client
            .post(self.url("/act"))
            .json(&json!({"action": action.to_line()}))
            .send()
            .map_err(|e| EnvError::Unreachable(e.to_string()))?;
        Self::check(resp).map(|_| ())
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        let resp = self
            .client
            .post(self.url("/reset"))
            .send()
            .map_err(|e| EnvError::Unreachable(e.to_string()))?;
        Self::check(resp).map(|_| ())
    }
}
