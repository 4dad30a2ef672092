use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MOCK_RESPONSES: &str = include_str!("../../data/mock_responses.txt");

/// Environment variable naming the completion endpoint URL.
pub const ENV_URL: &str = "QBRIDGE_LLM_URL";
/// Environment variable naming the model.
pub const ENV_MODEL: &str = "QBRIDGE_LLM_MODEL";
/// Environment variable carrying the bearer key.
pub const ENV_KEY: &str = "QBRIDGE_LLM_KEY";

/// Where and how fast to send completion requests.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub retry_limit: usize,
    #[serde(with = "secs")]
    pub timeout: Duration,
    /// Initial wait after a rate-limit response; doubles per retry.
    #[serde(with = "secs")]
    pub backoff: Duration,
    pub max_tokens: u32,
}

impl std::fmt::Debug for EndpointConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EndpointConfig")
            .field("base_url", &self.base_url)
            .field("model_name", &self.model_name)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("max_in_flight", &self.max_in_flight)
            .field("retry_limit", &self.retry_limit)
            .field("timeout", &self.timeout)
            .field("backoff", &self.backoff)
            .field("max_tokens", &self.max_tokens)
            .finish()
    }
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "gpt-oss-20b".into(),
            api_key: None,
            max_in_flight: 4,
            retry_limit: 2,
            timeout: Duration::from_secs(300),
            backoff: Duration::from_secs(2),
            max_tokens: 8192,
        }
    }
}

impl EndpointConfig {
    /// Overrides URL, model and key from the process environment when set.
    pub fn apply_env(&mut self) {
        self.apply_vars(|k| std::env::var(k).ok());
    }

    pub fn apply_vars(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get(ENV_URL) {
            self.base_url = v;
        }
        if let Some(v) = get(ENV_MODEL) {
            self.model_name = v;
        }
        if let Some(v) = get(ENV_KEY) {
            self.api_key = Some(v);
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// One completion call. `task_index` and `attempt` let deterministic
/// clients key their answers without depending on scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub temperature: f64,
    pub max_tokens: u32,
    pub task_index: usize,
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("rate limited")]
    RateLimited,
    #[error("status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

/// A text completion backend.
pub trait CompletionClient: Sync {
    fn model_name(&self) -> &str;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError>;
}

type Responder = dyn Fn(&CompletionRequest<'_>) -> Result<String, ClientError> + Send + Sync;

/// Offline client answering from canned text.
#[derive(Clone)]
pub struct MockClient {
    model_name: String,
    responder: Arc<Responder>,
}

impl std::fmt::Debug for MockClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockClient")
            .field("model_name", &self.model_name)
            .finish_non_exhaustive()
    }
}

impl MockClient {
    pub fn from_fn<F>(model_name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&CompletionRequest<'_>) -> Result<String, ClientError> + Send + Sync + 'static,
    {
        Self {
            model_name: model_name.into(),
            responder: Arc::new(f),
        }
    }

    /// Answers task `i` with `responses[i % len]` on every attempt.
    pub fn per_task(responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "mock needs at least one response");
        Self::from_fn("mock", move |r| Ok(responses[r.task_index % responses.len()].clone()))
    }

    /// Answers attempt `a` of every task with `responses[min(a, len - 1)]`.
    pub fn per_attempt(responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "mock needs at least one response");
        Self::from_fn("mock", move |r| {
            Ok(responses[r.attempt.min(responses.len() - 1)].clone())
        })
    }

    /// The bundled contract-conformant responses, cycled by task index,
    /// with the requested target path stamped into both payloads.
    pub fn builtin() -> Self {
        let canned = builtin_responses();
        Self::from_fn("mock", move |r| {
            let target = r
                .prompt
                .lines()
                .skip_while(|l| *l != "#TargetOutput")
                .find_map(|l| l.strip_prefix("relative_path: "))
                .unwrap_or("unknown");
            let stamp = format!("# target: {target}\n");
            let text = &canned[r.task_index % canned.len()];
            Ok(text.replace("_code: '''\n", &format!("_code: '''\n{stamp}")))
        })
    }
}

/// The canned generations shipped with the crate.
pub fn builtin_responses() -> Vec<String> {
    MOCK_RESPONSES.split("#%%\n").map(str::to_string).collect()
}

impl CompletionClient for MockClient {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        (self.responder)(request)
    }
}

/// Chat-completions client over HTTP.
#[cfg(feature = "http")]
#[derive(Debug, Clone)]
pub struct HttpClient {
    endpoint: EndpointConfig,
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpClient {
    pub fn new(endpoint: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { endpoint, agent }
    }
}

#[cfg(feature = "http")]
impl CompletionClient for HttpClient {
    fn model_name(&self) -> &str {
        &self.endpoint.model_name
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        let body = serde_json::json!({
            "model": self.endpoint.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut call = self.agent.post(&self.endpoint.base_url);
        if let Some(key) = &self.endpoint.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(&body)
            .map_err(|e| ClientError::Unreachable(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 {
            return Err(ClientError::RateLimited);
        }
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Unreachable(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ClientError::Status { status, body: text });
        }
        extract_content(&text)
    }
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn extract_content(body: &str) -> Result<String, ClientError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ClientError::MalformedResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| ClientError::MalformedResponse("no choices[0].message.content".into()))
}
