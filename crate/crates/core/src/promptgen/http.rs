//! HTTP backend speaking either the native `{prompt, temperature, max_tokens}`
//! → `{text}` contract or an OpenAI-compatible completions endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ureq::Agent;

use super::{Backend, BackendError, BackendRequest, BackendResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireFlavor {
    #[default]
    Native,
    /// `/v1/completions` style: response text at `choices[0].text`.
    OpenAi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub url: String,
    #[serde(default, skip_serializing)]
    pub token: Option<String>,
    #[serde(default)]
    pub flavor: WireFlavor,
    /// Sent as `model` on OpenAI-compatible endpoints.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

impl HttpBackendConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token: None,
            flavor: WireFlavor::Native,
            model: None,
            timeout_secs: default_timeout_secs(),
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn body(&self, request: &BackendRequest) -> Value {
        let mut body = json!({
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let (WireFlavor::OpenAi, Some(model)) = (self.config.flavor, &self.config.model) {
            body["model"] = json!(model);
        }
        body
    }

    fn extract_text(&self, body: &Value) -> Option<String> {
        let text = match self.config.flavor {
            WireFlavor::Native => body.get("text"),
            WireFlavor::OpenAi => body.pointer("/choices/0/text"),
        };
        text.and_then(Value::as_str).map(str::to_string)
    }
}

fn transport_error(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(t) => BackendError::Timeout(t.to_string()),
        other => BackendError::Unavailable(other.to_string()),
    }
}

impl Backend for HttpBackend {
    fn identity(&self) -> String {
        let flavor = match self.config.flavor {
            WireFlavor::Native => "native",
            WireFlavor::OpenAi => "openai",
        };
        match &self.config.model {
            Some(model) => format!("http({flavor}, {}, model={model})", self.config.url),
            None => format!("http({flavor}, {})", self.config.url),
        }
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let mut req = self
            .agent
            .post(&self.config.url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = req
            .send(self.body(request).to_string().as_bytes())
            .map_err(transport_error)?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(transport_error)?;
        if status >= 500 {
            return Err(BackendError::Unavailable(format!("HTTP {status}: {body}")));
        }
        if status >= 400 {
            return Err(BackendError::Rejected { status, body });
        }
        let parsed: Value = serde_json::from_str(&body).map_err(|e| BackendError::Rejected {
            status,
            body: format!("response is not JSON ({e}): {body}"),
        })?;
        let text = self
            .extract_text(&parsed)
            .ok_or_else(|| BackendError::Rejected {
                status,
                body: format!("response lacks completion text: {body}"),
            })?;
        Ok(BackendResponse { text })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_bodies() {
        let req = BackendRequest {
            prompt: "p".into(),
            temperature: 0.5,
            max_tokens: 64,
        };
        let native = HttpBackend::new(HttpBackendConfig::new("http://x"));
        assert_eq!(
            native.body(&req),
            json!({"prompt": "p", "temperature": 0.5, "max_tokens": 64})
        );
        let mut cfg = HttpBackendConfig::new("http://x");
        cfg.flavor = WireFlavor::OpenAi;
        cfg.model = Some("llama".into());
        let openai = HttpBackend::new(cfg);
        assert_eq!(openai.body(&req)["model"], "llama");
    }

    #[test]
    fn response_extraction() {
        let native = HttpBackend::new(HttpBackendConfig::new("http://x"));
        assert_eq!(
            native.extract_text(&json!({"text": "hi"})).as_deref(),
            Some("hi")
        );
        let mut cfg = HttpBackendConfig::new("http://x");
        cfg.flavor = WireFlavor::OpenAi;
        let openai = HttpBackend::new(cfg);
        assert_eq!(
            openai
                .extract_text(&json!({"choices": [{"text": "yo"}]}))
                .as_deref(),
            Some("yo")
        );
        assert_eq!(openai.extract_text(&json!({"text": "hi"})), None);
    }

    #[test]
    fn token_is_not_serialized() {
        let mut cfg = HttpBackendConfig::new("http://x");
        cfg.token = Some("secret".into());
        assert!(!serde_json::to_string(&cfg).unwrap().contains("secret"));
    }
}
