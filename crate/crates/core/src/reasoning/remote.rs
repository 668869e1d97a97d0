use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{PromptPayload, ReasoningBackend, ReasoningError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteReasoningConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: String,
}

impl Default for RemoteReasoningConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            timeout_secs: 30,
            api_key_env: "TASKGRASP_VLM_API_KEY".into(),
        }
    }
}

/// Chat-completions client sending the system text, the user text and the
/// image as a base64 PNG data URL.
pub struct RemoteReasoningBackend {
    cfg: RemoteReasoningConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteReasoningBackend {
    pub fn new(cfg: RemoteReasoningConfig) -> Result<Self, ReasoningError> {
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(cfg, api_key)
    }

    pub fn with_key(cfg: RemoteReasoningConfig, api_key: Option<String>) -> Result<Self, ReasoningError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ReasoningError::BackendUnavailable(e.to_string()))?;
        Ok(Self { cfg, api_key, client })
    }

    pub fn request_body(&self, prompt: &PromptPayload) -> Value {
        json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": [
                    {"type": "text", "text": prompt.user_text},
                    {"type": "image_url", "image_url": {"url": prompt.image_data_url()}},
                ]},
            ],
        })
    }
}

impl ReasoningBackend for RemoteReasoningBackend {
    fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut req = self.client.post(&url).json(&self.request_body(prompt));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let unavailable = |e: reqwest::Error| ReasoningError::BackendUnavailable(e.to_string());
        let resp = req.send().map_err(unavailable)?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(ReasoningError::BackendUnavailable(format!("{url} answered {status}: {body}")));
        }
        let body: Value = resp.json().map_err(unavailable)?;
        match &body["choices"][0]["message"]["content"] {
            Value::String(s) => Ok(s.clone()),
            // some servers return content as a list of text parts
            Value::Array(parts) => Ok(parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join("")),
            _ => Err(ReasoningError::BackendUnavailable(format!("{url}: response has no message content"))),
        }
    }
}
