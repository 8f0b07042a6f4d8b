//! Chat-completion backends.
//!
//! Wire format, request:
//!
//! ```json
//! {"model": "<name>", "messages": [{"role": "system", "content": "..."}], ...sampling}
//! ```
//!
//! Response: the assistant text is read from `choices[0].message.content`.
//! Sampling knobs from [`BackendConfig::sampling`] are merged into the
//! request object unchanged. The bearer token is read from the environment
//! variable named by [`BackendConfig::auth_env`] at call time and sent only
//! in the `Authorization` header.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    /// Panics on empty content.
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        assert!(!content.is_empty(), "chat message content must be non-empty");
        ChatMessage { role, content }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("mock script exhausted")]
    ScriptExhausted,
    #[error("io error: {0}")]
    Io(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid backend config: {0}")]
    Config(String),
}

impl BackendError {
    /// Worth retrying: transport trouble, timeouts, rate limits, server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Timeout => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete(messages)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete(messages)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete(messages)
    }
}

/// Replays a fixed list of responses in order and records every prompt.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    prompts: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// Responses are separated by lines consisting of `---`; surrounding
    /// whitespace is trimmed and empty entries are dropped.
    pub fn parse_script(text: &str) -> Self {
        let mut responses = Vec::new();
        let mut current = String::new();
        for line in text.lines() {
            if line.trim_end() == "---" {
                responses.push(std::mem::take(&mut current));
            } else {
                current.push_str(line);
                current.push('\n');
            }
        }
        responses.push(current);
        Self::new(responses.into_iter().map(|r| r.trim().to_string()).filter(|r| !r.is_empty()))
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().unwrap().len()
    }

    /// Every message list passed to `complete`, in call order.
    pub fn prompts(&self) -> Vec<Vec<ChatMessage>> {
        self.prompts.lock().unwrap().clone()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        self.prompts.lock().unwrap().push(messages.to_vec());
        self.responses.lock().unwrap().pop_front().ok_or(BackendError::ScriptExhausted)
    }
}

pub fn mock_from_script(path: impl AsRef<Path>) -> Result<ScriptedBackend, BackendError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| BackendError::Io(format!("{}: {e}", path.as_ref().display())))?;
    Ok(ScriptedBackend::parse_script(&text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_secs: f64,
    /// Passed through into the request body as-is.
    #[serde(default)]
    pub sampling: serde_json::Map<String, serde_json::Value>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> f64 {
    0.5
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        BackendConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            auth_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_base_secs: default_backoff(),
            sampling: Default::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(BackendError::Config(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if self.endpoint.is_empty() || self.model.is_empty() {
            return Err(BackendError::Config("endpoint and model are required".into()));
        }
        if self.sampling.contains_key("model") || self.sampling.contains_key("messages") {
            return Err(BackendError::Config("sampling knobs may not override model or messages".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Delay before retry number `attempt` (0-based): `base · 2^attempt`.
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base_secs * 2f64.powi(attempt.min(16) as i32))
    }

    pub fn token(&self) -> Option<String> {
        self.auth_env.as_ref().and_then(|name| std::env::var(name).ok())
    }
}

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(flatten)]
    sampling: &'a serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    content: Option<String>,
}

pub fn request_body(config: &BackendConfig, messages: &[ChatMessage]) -> String {
    serde_json::to_string(&WireRequest { model: &config.model, messages, sampling: &config.sampling })
        .expect("request serializes")
}

pub fn parse_response_body(body: &str) -> Result<String, BackendError> {
    let resp: WireResponse = serde_json::from_str(body).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
    resp.choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::InvalidResponse("no choices[0].message.content".into()))
}

/// One HTTP POST. Implementations return `(status, body)` or a transport
/// error; retries are handled by [`HttpBackend`].
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str, timeout: Duration) -> Result<(u16, String), BackendError>;
}

pub struct HttpBackend<T> {
    pub config: BackendConfig,
    transport: T,
    sleep: Box<dyn Fn(Duration) + Send + Sync>,
}

impl<T: Transport> HttpBackend<T> {
    pub fn new(config: BackendConfig, transport: T) -> Result<Self, BackendError> {
        config.validate()?;
        Ok(HttpBackend { config, transport, sleep: Box::new(std::thread::sleep) })
    }

    /// Replaces the sleep used between retries.
    pub fn with_sleep(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }
}

impl<T: Transport> CompletionBackend for HttpBackend<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let body = request_body(&self.config, messages);
        let token = self.config.token();
        let mut attempt = 0;
        loop {
            let result = self
                .transport
                .post_json(&self.config.endpoint, token.as_deref(), &body, self.config.timeout())
                .and_then(|(status, text)| {
                    if (200..300).contains(&status) {
                        Ok(text)
                    } else {
                        Err(BackendError::Status { status, body: text })
                    }
                });
            match result {
                Ok(text) => return parse_response_body(&text),
                Err(e) if e.is_transient() && attempt < self.config.max_retries => {
                    (self.sleep)(self.config.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
