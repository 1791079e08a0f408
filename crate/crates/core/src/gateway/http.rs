//! Chat-completion client for OpenAI-compatible HTTP endpoints.
//!
//! Request body, POSTed to `{endpoint}/chat/completions`:
//!
//! ```json
//! {"model": "...", "messages": [{"role": "system", "content": "..."},
//!  {"role": "user", "content": "..."}], "temperature": 0.7,
//!  "max_tokens": 4096, "seed": 7}
//! ```
//!
//! `seed` is omitted when the request has none. The reply text is read from
//! `choices[0].message.content`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatProvider, ChatRequest, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    /// Base URL, e.g. `https://api.example.com/v1`.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
    url: String,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> HttpProvider {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/chat/completions", config.endpoint.trim_end_matches('/'));
        HttpProvider { config, agent, url }
    }
}

/// JSON body for `request`.
pub fn request_body(model: &str, request: &ChatRequest) -> Value {
    let mut body = json!({
        "model": model,
        "messages": [
            {"role": "system", "content": request.system_text},
            {"role": "user", "content": request.user_text},
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    });
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    body
}

/// Extracts the assistant text from a reply body.
pub fn reply_text(body: &str) -> Result<String, ProviderError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| ProviderError::Malformed(format!("not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
}

/// Maps an HTTP status to an error class. `None` for success.
pub fn classify_status(status: u16, body: &str) -> Option<ProviderError> {
    let snippet: String = body.chars().take(200).collect();
    match status {
        200..=299 => None,
        401 | 403 => Some(ProviderError::Auth(format!("HTTP {status}: {snippet}"))),
        408 | 409 | 429 | 500..=599 => Some(ProviderError::Transient(format!("HTTP {status}"))),
        _ => Some(ProviderError::Fatal(format!("HTTP {status}: {snippet}"))),
    }
}

impl ChatProvider for HttpProvider {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let body = request_body(&self.config.model, request).to_string();
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.as_str()).map_err(|e| match e {
            ureq::Error::BadUri(_) | ureq::Error::InvalidProxyUrl => ProviderError::Fatal(e.to_string()),
            other => ProviderError::Transient(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transient(format!("reading body: {e}")))?;
        if let Some(err) = classify_status(status, &text) {
            return Err(err);
        }
        reply_text(&text)
    }
}
