use std::fmt;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientConfig {
    pub url: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Total attempts per request, first one included.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_api_key_env() -> String {
    "CONVLAB_API_KEY".into()
}

fn default_max_attempts() -> u32 {
    3
}

fn default_max_in_flight() -> usize {
    4
}

fn default_backoff_ms() -> u64 {
    200
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl ClientConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        ClientConfig {
            url: url.into(),
            model: model.into(),
            temperature: 0.0,
            api_key_env: default_api_key_env(),
            max_attempts: default_max_attempts(),
            max_in_flight: default_max_in_flight(),
            backoff_ms: default_backoff_ms(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map_or("", |m| m.content.as_str())
    }
}

/// Outcome of a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttemptError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("status {status}: {body}")]
    Status { status: u16, body: String },
}

impl AttemptError {
    fn retryable(&self) -> bool {
        match self {
            AttemptError::Transport(_) => true,
            AttemptError::Status { status, .. } => matches!(status, 408 | 429 | 500..=599),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned status {status} after {attempts} attempts: {body}")]
    Provider { status: u16, body: String, attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

/// One chat-completion round trip, without retries.
pub trait ChatEndpoint: Send + Sync + fmt::Debug {
    fn send(&self, request: &ChatRequest) -> Result<String, AttemptError>;
}

/// HTTP endpoint speaking the common chat-completions JSON format.
#[derive(Debug)]
pub struct HttpEndpoint {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(config: &ClientConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        HttpEndpoint {
            url: config.url.clone(),
            api_key: std::env::var(&config.api_key_env).ok(),
            agent,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

const BODY_EXCERPT: usize = 200;

impl ChatEndpoint for HttpEndpoint {
    fn send(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(request)
            .map_err(|e| AttemptError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AttemptError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(AttemptError::Status {
                status,
                body: body.chars().take(BODY_EXCERPT).collect(),
            });
        }
        let parsed: ChatResponse = serde_json::from_str(&body).map_err(|e| AttemptError::Status {
            status,
            body: format!("malformed response ({e}): {}", body.chars().take(BODY_EXCERPT).collect::<String>()),
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| AttemptError::Status { status, body: "response has no choices".into() })
    }
}

type Responder = dyn Fn(&ChatRequest) -> Result<String, AttemptError> + Send + Sync;

/// In-process endpoint answering through a closure.
pub struct MockEndpoint {
    respond: Box<Responder>,
}

impl MockEndpoint {
    pub fn new(respond: impl Fn(&ChatRequest) -> Result<String, AttemptError> + Send + Sync + 'static) -> Self {
        MockEndpoint { respond: Box::new(respond) }
    }

    /// Always answers `text`.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_| Ok(text.clone()))
    }
}

impl fmt::Debug for MockEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MockEndpoint")
    }
}

impl ChatEndpoint for MockEndpoint {
    fn send(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        (self.respond)(request)
    }
}

#[derive(Debug)]
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore { free: Mutex::new(permits.max(1)), cv: Condvar::new() }
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

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Endpoint plus retry policy and an in-flight cap.
#[derive(Debug)]
pub struct Client {
    config: ClientConfig,
    endpoint: Box<dyn ChatEndpoint>,
    in_flight: Semaphore,
}

impl Client {
    pub fn new(config: ClientConfig, endpoint: impl ChatEndpoint + 'static) -> Self {
        Client {
            in_flight: Semaphore::new(config.max_in_flight),
            endpoint: Box::new(endpoint),
            config,
        }
    }

    pub fn http(config: ClientConfig) -> Self {
        let endpoint = HttpEndpoint::new(&config);
        Self::new(config, endpoint)
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn request(&self, system: Option<&str>, prompt: &str, seed: Option<u64>) -> ChatRequest {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = system {
            messages.push(ChatMessage { role: "system".into(), content: system.into() });
        }
        messages.push(ChatMessage { role: "user".into(), content: prompt.into() });
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            seed,
        }
    }

    pub fn complete(&self, prompt: &str) -> Result<Completion, ClientError> {
        self.send(&self.request(None, prompt, None))
    }

    /// Sends `request`, retrying transport failures, 408, 429 and 5xx with
    /// exponential backoff.
    pub fn send(&self, request: &ChatRequest) -> Result<Completion, ClientError> {
        let max_attempts = self.config.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.in_flight.acquire();
                self.endpoint.send(request)
            };
            match result {
                Ok(text) => return Ok(Completion { text, attempts: attempt }),
                Err(e) if e.retryable() && attempt < max_attempts => {
                    let wait = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                    warn!("attempt {attempt}/{max_attempts} failed ({e}); retrying in {wait} ms");
                    thread::sleep(Duration::from_millis(wait));
                }
                Err(AttemptError::Transport(message)) => {
                    debug!("giving up after {attempt} attempts");
                    return Err(ClientError::Transport { attempts: attempt, message });
                }
                Err(AttemptError::Status { status, body }) => {
                    return Err(ClientError::Provider { status, body, attempts: attempt })
                }
            }
        }
    }
}
