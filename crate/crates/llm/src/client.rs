//! OpenAI-compatible chat-completion client.
//!
//! Requests go to `POST {base_url}/chat/completions` with a bearer token read
//! from the endpoint's environment variable at call time. Transient failures
//! (timeouts, connection errors, 429 and 5xx) are retried up to
//! `RetryPolicy::max_attempts` times in total, sleeping `base_delay * 2^i`
//! before retry `i`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{LlmError, Result};

/// Sampling parameters sent with every request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_p: 0.9,
            max_tokens: 512,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::Parameter(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::Parameter(format!(
                "temperature {} must be finite and non-negative",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::Parameter("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEndpoint {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    /// Persona text sent as the system message.
    #[serde(default)]
    pub system_prompt: Option<String>,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

impl AgentEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Result<Self> {
        let ep = Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            system_prompt: None,
        };
        ep.validate()?;
        Ok(ep)
    }

    pub fn with_persona(mut self, system_prompt: impl Into<String>) -> Self {
        self.system_prompt = Some(system_prompt.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let url = Url::parse(&self.base_url)
            .map_err(|e| LlmError::Parameter(format!("base_url {:?}: {e}", self.base_url)))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(LlmError::Parameter(format!(
                "base_url {:?} must be http or https",
                self.base_url
            )));
        }
        if self.model.trim().is_empty() {
            return Err(LlmError::Parameter("model name is empty".into()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// Wire body of a chat-completion request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(endpoint: &AgentEndpoint, messages: &[Message], params: &GenerationParams) -> Self {
        Self {
            model: endpoint.model.clone(),
            messages: messages.to_vec(),
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Pulls the first choice's content out of a response body.
pub fn parse_completion(body: &str) -> Result<String> {
    let parsed: ChatResponse =
        serde_json::from_str(body).map_err(|e| LlmError::Protocol(format!("{e}: {}", excerpt(body))))?;
    parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?
        .message
        .content
        .ok_or_else(|| LlmError::Protocol("first choice has no content".into()))
}

pub(crate) fn excerpt(body: &str) -> String {
    const MAX: usize = 200;
    match body.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &body[..i]),
        None => body.to_string(),
    }
}

pub trait ChatClient: Sync {
    fn chat_complete(
        &self,
        endpoint: &AgentEndpoint,
        messages: &[Message],
        params: &GenerationParams,
    ) -> Result<String>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

pub struct HttpChatClient {
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpChatClient {
    pub fn new(timeout: Duration, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, retry }
    }

    fn attempt(&self, endpoint: &AgentEndpoint, request: &ChatRequest) -> Result<String> {
        let mut call = self.agent.post(&endpoint.completions_url());
        if let Ok(key) = std::env::var(&endpoint.api_key_env) {
            if !key.is_empty() {
                call = call.header("Authorization", &format!("Bearer {key}"));
            }
        }
        let mut response = call.send_json(request).map_err(map_ureq)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(map_ureq)?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status {
                status,
                body: excerpt(&body),
            });
        }
        parse_completion(&body)
    }
}

impl Default for HttpChatClient {
    fn default() -> Self {
        Self::new(Duration::from_secs(120), RetryPolicy::default())
    }
}

fn map_ureq(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::Timeout(t) => LlmError::Timeout(t.to_string()),
        other => LlmError::Transport(other.to_string()),
    }
}

impl ChatClient for HttpChatClient {
    fn chat_complete(
        &self,
        endpoint: &AgentEndpoint,
        messages: &[Message],
        params: &GenerationParams,
    ) -> Result<String> {
        endpoint.validate()?;
        params.validate()?;
        if messages.is_empty() {
            return Err(LlmError::Parameter("no messages".into()));
        }
        let request = ChatRequest::new(endpoint, messages, params);
        let mut retry = 0;
        loop {
            match self.attempt(endpoint, &request) {
                Err(e) if e.is_transient() && retry + 1 < self.retry.max_attempts => {
                    log::warn!("{} attempt {} failed: {e}", endpoint.model, retry + 1);
                    std::thread::sleep(self.retry.delay(retry));
                    retry += 1;
                }
                other => return other,
            }
        }
    }
}
