use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::RephraseScheme;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("provider returned empty text")]
    Empty,
    #[error("provider unavailable: {0}")]
    Unavailable(String),
}

impl ProviderError {
    /// Transport failures, rate limiting and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// One rewrite request. Network providers only look at `prompt`; the other
/// fields let offline providers behave sensibly.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub document: &'a str,
    pub scheme: RephraseScheme,
}

pub trait Provider: Send + Sync {
    /// Identifier recorded with every response and used in cache keys,
    /// typically the model name.
    fn id(&self) -> &str;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

/// Returns the document unchanged. Useful as a control variant and in tests.
#[derive(Debug, Clone, Default)]
pub struct IdentityProvider;

impl Provider for IdentityProvider {
    fn id(&self) -> &str {
        "identity"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        Ok(request.document.to_owned())
    }
}

/// Never answers; only cached responses can be served. Replays a frozen
/// cache without network access.
#[derive(Debug, Clone)]
pub struct CacheOnlyProvider {
    id: String,
}

impl CacheOnlyProvider {
    pub fn new(id: impl Into<String>) -> Self {
        CacheOnlyProvider { id: id.into() }
    }
}

impl Provider for CacheOnlyProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, _request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        Err(ProviderError::Unavailable(format!(
            "no cached response for provider {:?} and network access is disabled",
            self.id
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    /// `POST {endpoint}` with `{model, messages, temperature}`; bearer auth.
    OpenAiChat,
    /// `POST {endpoint}/models/{model}:generateContent`; `x-goog-api-key` auth.
    Gemini,
}

impl FromStr for ApiStyle {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "openai" | "openai_chat" | "chat" => Ok(ApiStyle::OpenAiChat),
            "gemini" => Ok(ApiStyle::Gemini),
            other => Err(crate::Error::InvalidArgument(format!("unknown API style {other:?}"))),
        }
    }
}

impl fmt::Display for ApiStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApiStyle::OpenAiChat => "openai_chat",
            ApiStyle::Gemini => "gemini",
        })
    }
}

/// Connection and pacing settings for an HTTP provider. The API key itself
/// is read from the environment variable named by `api_key_env` and never
/// stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub style: ApiStyle,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    /// 0 disables the cap.
    pub requests_per_minute: u32,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            style: ApiStyle::Gemini,
            endpoint: "https://generativelanguage.googleapis.com/v1beta".into(),
            model: "gemini-2.5-flash".into(),
            api_key_env: "GEMINI_API_KEY".into(),
            temperature: 0.0,
            max_retries: 3,
            retry_backoff_ms: 1000,
            requests_per_minute: 60,
            max_in_flight: 4,
            timeout_secs: 60,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(crate::Error::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_in_flight == 0 {
            return Err(crate::Error::Config("max_in_flight must be at least 1".into()));
        }
        if self.model.is_empty() || self.endpoint.is_empty() {
            return Err(crate::Error::Config("provider endpoint and model are required".into()));
        }
        Ok(())
    }
}

/// Blocking JSON-over-HTTP chat/completion client.
pub struct HttpProvider {
    config: ProviderConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProvider")
            .field("config", &self.config)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpProvider {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: ProviderConfig) -> crate::Result<Self> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            crate::Error::Config(format!(
                "environment variable {} holding the API key is not set",
                config.api_key_env
            ))
        })?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: ProviderConfig, api_key: String) -> crate::Result<Self> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProvider {
            config,
            api_key,
            agent,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn url(&self) -> String {
        let base = self.config.endpoint.trim_end_matches('/');
        match self.config.style {
            ApiStyle::OpenAiChat => base.to_owned(),
            ApiStyle::Gemini => format!("{base}/models/{}:generateContent", self.config.model),
        }
    }
}

/// Request body for the given API style.
pub fn request_body(style: ApiStyle, model: &str, temperature: f64, prompt: &str) -> Value {
    match style {
        ApiStyle::OpenAiChat => json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }),
        ApiStyle::Gemini => json!({
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
            "generationConfig": {"temperature": temperature},
        }),
    }
}

/// Extracts the generated text from a response body.
pub fn response_text(style: ApiStyle, body: &Value) -> Result<String, ProviderError> {
    let text = match style {
        ApiStyle::OpenAiChat => body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned),
        ApiStyle::Gemini => body
            .pointer("/candidates/0/content/parts")
            .and_then(Value::as_array)
            .map(|parts| {
                parts
                    .iter()
                    .filter_map(|p| p.get("text").and_then(Value::as_str))
                    .collect::<String>()
            }),
    };
    text.ok_or_else(|| {
        let mut snippet = body.to_string();
        snippet.truncate(200);
        ProviderError::Protocol(format!("no generated text in response: {snippet}"))
    })
}

impl Provider for HttpProvider {
    fn id(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = request_body(
            self.config.style,
            &self.config.model,
            self.config.temperature,
            request.prompt,
        );
        let req = self.agent.post(&self.url()).header("Content-Type", "application/json");
        let req = match self.config.style {
            ApiStyle::OpenAiChat => req.header("Authorization", &format!("Bearer {}", self.api_key)),
            ApiStyle::Gemini => req.header("x-goog-api-key", &self.api_key),
        };
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            let mut body = text;
            body.truncate(500);
            return Err(ProviderError::Http { status, body });
        }
        let json: Value =
            serde_json::from_str(&text).map_err(|e| ProviderError::Protocol(e.to_string()))?;
        response_text(self.config.style, &json)
    }
}
