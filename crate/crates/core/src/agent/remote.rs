//! Blocking client for OpenAI-compatible chat-completion endpoints.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{Agent, AgentError, AgentErrorKind, AgentRequest, Completion};

pub const DEFAULT_ENDPOINT: &str = "https://openrouter.ai/api/v1/chat/completions";
pub const DEFAULT_KEY_ENV: &str = "OPENROUTER_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Transport retries per request, on top of the first attempt.
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    /// Requests in flight across all models.
    pub max_concurrency: usize,
    /// Minimum spacing between request starts for the same model. 0 disables pacing.
    pub min_interval_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            api_key_env: DEFAULT_KEY_ENV.into(),
            timeout_secs: 120,
            max_retries: 5,
            backoff_base_ms: 1000,
            backoff_cap_ms: 60_000,
            max_concurrency: 16,
            min_interval_ms: 0,
        }
    }
}

/// Decoding parameters. Unset fields are left to the provider.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    /// Merged verbatim into the request body.
    pub extra: Map<String, Value>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("credential missing or rejected: {0}")]
    Auth(String),
    #[error("transport failure after {retries} retries: {detail}")]
    Transport { detail: String, retries: u32 },
}

impl From<ClientError> for AgentError {
    fn from(e: ClientError) -> Self {
        AgentError::new(AgentErrorKind::Transport, e.to_string())
    }
}

/// Returns the credential named by `env`, or an Auth error.
pub fn resolve_key(env: &str) -> Result<String, ClientError> {
    match std::env::var(env) {
        Ok(key) if !key.trim().is_empty() => Ok(key),
        _ => Err(ClientError::Auth(format!("environment variable {env} is not set"))),
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            permits: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().expect("semaphore poisoned");
        while *p == 0 {
            p = self.freed.wait(p).expect("semaphore poisoned");
        }
        *p -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Reply plus transport metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub text: String,
    pub retries: u32,
    pub elapsed_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub correlation_id: String,
}

enum Attempt {
    Done(ChatReply),
    Retry { detail: String, wait: Option<Duration> },
    Fatal(ClientError),
}

/// Shared, thread-safe client. Clone the `Arc` into each agent.
pub struct ChatClient {
    config: ClientConfig,
    key: String,
    http: reqwest::blocking::Client,
    gate: Semaphore,
    last_start: Mutex<HashMap<String, Instant>>,
}

impl ChatClient {
    /// Reads the credential from the configured environment variable.
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        let key = resolve_key(&config.api_key_env)?;
        Self::with_key(config, key)
    }

    pub fn with_key(config: ClientConfig, key: impl Into<String>) -> Result<Self, ClientError> {
        let key = key.into();
        if key.trim().is_empty() {
            return Err(ClientError::Auth("empty credential".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::Transport {
                detail: e.to_string(),
                retries: 0,
            })?;
        Ok(Self {
            gate: Semaphore::new(config.max_concurrency),
            config,
            key,
            http,
            last_start: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn pace(&self, model: &str) {
        if self.config.min_interval_ms == 0 {
            return;
        }
        let gap = Duration::from_millis(self.config.min_interval_ms);
        let wait = {
            let mut last = self.last_start.lock().expect("pacing lock poisoned");
            let now = Instant::now();
            let start = match last.get(model) {
                Some(prev) if *prev + gap > now => *prev + gap,
                _ => now,
            };
            last.insert(model.to_string(), start);
            start - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = self
            .config
            .backoff_base_ms
            .saturating_mul(1u64 << retry.min(20))
            .min(self.config.backoff_cap_ms);
        Duration::from_millis(ms)
    }

    /// One chat completion with a single user message.
    pub fn complete(&self, model: &str, prompt: &str, params: &SamplingParams) -> Result<ChatReply, ClientError> {
        let correlation_id = uuid::Uuid::new_v4().to_string();
        let mut body = json!({
            "model": model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let obj = body.as_object_mut().expect("object literal");
        if let Some(t) = params.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        if let Some(m) = params.max_tokens {
            obj.insert("max_tokens".into(), json!(m));
        }
        for (k, v) in &params.extra {
            obj.insert(k.clone(), v.clone());
        }

        let started = Instant::now();
        let mut retries = 0;
        loop {
            let outcome = {
                let _permit = self.gate.acquire();
                self.pace(model);
                self.attempt(&body, &correlation_id, retries, started)
            };
            match outcome {
                Attempt::Done(reply) => {
                    debug!("{correlation_id}: {model} answered after {retries} retries");
                    return Ok(reply);
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { detail, wait } => {
                    if retries >= self.config.max_retries {
                        return Err(ClientError::Transport { detail, retries });
                    }
                    let wait = wait
                        .map(|w| w.min(Duration::from_millis(self.config.backoff_cap_ms)))
                        .unwrap_or_else(|| self.backoff(retries));
                    retries += 1;
                    warn!("{correlation_id}: {model}: {detail}; retry {retries} in {wait:?}");
                    thread::sleep(wait);
                }
            }
        }
    }

    fn attempt(&self, body: &Value, correlation_id: &str, retries: u32, started: Instant) -> Attempt {
        let response = self
            .http
            .post(&self.config.endpoint)
            .bearer_auth(&self.key)
            .header("X-Request-Id", correlation_id)
            .json(body)
            .send();
        let response = match response {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    detail: e.to_string(),
                    wait: None,
                }
            }
        };
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Attempt::Fatal(ClientError::Auth(format!("endpoint returned {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            let wait = response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Attempt::Retry {
                detail: format!("endpoint returned {status}"),
                wait,
            };
        }
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Attempt::Fatal(ClientError::Transport {
                detail: format!(
                    "endpoint returned {status}: {}",
                    text.chars().take(200).collect::<String>()
                ),
                retries,
            });
        }
        let value: Value = match response.json() {
            Ok(v) => v,
            Err(e) => {
                return Attempt::Retry {
                    detail: format!("unreadable response body: {e}"),
                    wait: None,
                }
            }
        };
        let Some(text) = value.pointer("/choices/0/message/content").and_then(Value::as_str) else {
            return Attempt::Retry {
                detail: "response has no choices[0].message.content".into(),
                wait: None,
            };
        };
        Attempt::Done(ChatReply {
            text: text.to_string(),
            retries,
            elapsed_ms: started.elapsed().as_millis() as u64,
            prompt_tokens: value.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
            completion_tokens: value.pointer("/usage/completion_tokens").and_then(Value::as_u64),
            correlation_id: correlation_id.to_string(),
        })
    }
}

/// A model behind a [`ChatClient`].
pub struct RemoteAgent {
    client: Arc<ChatClient>,
    model: String,
    params: SamplingParams,
}

impl RemoteAgent {
    pub fn new(client: Arc<ChatClient>, model: impl Into<String>, params: SamplingParams) -> Self {
        Self {
            client,
            model: model.into(),
            params,
        }
    }
}

impl Agent for RemoteAgent {
    fn act(&mut self, request: &AgentRequest<'_>) -> Result<Completion, AgentError> {
        let reply = self.client.complete(&self.model, request.prompt, &self.params)?;
        Ok(Completion {
            text: reply.text,
            elapsed_ms: Some(reply.elapsed_ms),
            transport_retries: reply.retries,
            prompt_tokens: reply.prompt_tokens,
            completion_tokens: reply.completion_tokens,
            correlation_id: Some(reply.correlation_id),
        })
    }
}
