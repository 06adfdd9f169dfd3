//! Minimal blocking JSON client for OpenAI-compatible endpoints.

use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    base: String,
    api_key: Option<String>,
}

impl HttpClient {
    pub fn new(base: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self { agent: ureq::Agent::new_with_config(config), base: base.into().trim_end_matches('/').to_string(), api_key }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    /// POST `body` to `<base><path>` and return the raw response text.
    /// 408, 429 and 5xx statuses and connection failures are transport
    /// errors (retryable); any other non-2xx status is a backend error.
    pub fn post_json(&self, path: &str, body: &Value) -> Result<String> {
        let url = format!("{}{}", self.base, path);
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let payload = serde_json::to_vec(body)?;
        let mut resp = req.send(&payload[..]).map_err(classify)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(classify)?;
        match status {
            200..=299 => Ok(text),
            408 | 429 | 500..=599 => Err(Error::Transport(format!("{url}: HTTP {status}"))),
            _ => Err(Error::Backend(format!("{url}: HTTP {status}: {}", truncate(&text, 200)))),
        }
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn classify(err: ureq::Error) -> Error {
    match err {
        ureq::Error::StatusCode(code) if code == 408 || code == 429 || code >= 500 => {
            Error::Transport(format!("HTTP {code}"))
        }
        ureq::Error::StatusCode(code) => Error::Backend(format!("HTTP {code}")),
        ureq::Error::Io(_)
        | ureq::Error::Timeout(_)
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectionFailed => Error::Transport(err.to_string()),
        other => Error::Backend(other.to_string()),
    }
}
