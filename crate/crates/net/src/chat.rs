//! Chat-completion policy client.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uxpipe_core::harness::{ContentPart, Policy, PolicyError, PolicyRequest};

pub const COMPLETIONS_PATH: &str = "/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_ms: u64,
    /// Extra attempts after the first one fails with a retryable error.
    pub max_retries: u32,
    /// Delay before retry `k` is `backoff_ms * 2^(k-1)`.
    pub backoff_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: "uxpipe-policy".into(),
            timeout_ms: 120_000,
            max_retries: 3,
            backoff_ms: 500,
            max_tokens: None,
            temperature: None,
        }
    }
}

/// Request body for one policy query.
pub fn build_request(cfg: &ChatConfig, request: &PolicyRequest) -> Value {
    let engine = base64::engine::general_purpose::STANDARD;
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| {
            let content: Vec<Value> = m
                .content
                .iter()
                .map(|part| match part {
                    ContentPart::Text(text) => json!({"type": "text", "text": text}),
                    ContentPart::Image(shot) => json!({
                        "type": "image_url",
                        "image_url": {"url": format!("data:image/png;base64,{}", engine.encode(shot.to_png()))}
                    }),
                })
                .collect();
            json!({"role": m.role.as_str(), "content": content})
        })
        .collect();
    let mut body = json!({"model": cfg.model, "messages": messages});
    if let Some(n) = cfg.max_tokens {
        body["max_tokens"] = json!(n);
    }
    if let Some(t) = cfg.temperature {
        body["temperature"] = json!(t);
    }
    body
}

/// Assistant text of the first choice. Content given as a list of text
/// parts is concatenated.
pub fn parse_response(body: &Value) -> Result<String, PolicyError> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or_else(|| PolicyError::Protocol("response has no choices[0].message.content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("")),
        other => Err(PolicyError::Protocol(format!("unexpected content type: {other}"))),
    }
}

enum Failure {
    Retryable(String),
    Fatal(PolicyError),
}

/// Policy served over the chat-completion wire protocol. Clones share one
/// connection pool and may be used from several threads.
#[derive(Debug, Clone)]
pub struct ChatPolicy {
    cfg: ChatConfig,
    client: reqwest::blocking::Client,
}

impl ChatPolicy {
    pub fn new(cfg: ChatConfig) -> Result<Self, PolicyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| PolicyError::Transport {
                attempts: 0,
                detail: e.to_string(),
            })?;
        Ok(Self { cfg, client })
    }

    pub fn config(&self) -> &ChatConfig {
        &self.cfg
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<String, Failure> {
        let resp = self
            .client
            .post(url)
            .json(body)
            .send()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Failure::Fatal(PolicyError::Transport {
                attempts: 1,
                detail: format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
            }));
        }
        let value: Value = resp
            .json()
            .map_err(|e| Failure::Fatal(PolicyError::Protocol(format!("response is not JSON: {e}"))))?;
        parse_response(&value).map_err(Failure::Fatal)
    }
}

impl Policy for ChatPolicy {
    fn generate(&mut self, request: &PolicyRequest) -> Result<String, PolicyError> {
        let url = format!("{}{COMPLETIONS_PATH}", self.cfg.base_url.trim_end_matches('/'));
        let body = build_request(&self.cfg, request);
        let mut last = String::new();
        let attempts = self.cfg.max_retries + 1;
        for k in 0..attempts {
            if k > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms.saturating_mul(1 << (k - 1).min(16))));
            }
            match self.attempt(&url, &body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(PolicyError::Transport { detail, .. })) => {
                    return Err(PolicyError::Transport { attempts: k + 1, detail })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(detail)) => {
                    log::warn!("policy attempt {} of {attempts} failed: {detail}", k + 1);
                    last = detail;
                }
            }
        }
        Err(PolicyError::Transport { attempts, detail: last })
    }
}
