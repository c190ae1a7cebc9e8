//! Text-completion boundary used by every LLM-driven optimizer.
//!
//! A [`Backend`] turns a chat-style [`CompletionRequest`] into text. The
//! live HTTP client lives in the harness crate; this module carries the
//! offline implementations (scripted mocks, policy stand-ins, record and
//! replay).

mod policy;
mod replay;

use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{contract, Result};

pub use policy::{Policy, PolicyBackend};
pub use replay::{CacheEntry, RecordingBackend, ReplayBackend, ReplayCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Sampling seed forwarded to the provider. Also distinguishes otherwise
    /// identical requests issued in parallel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    #[serde(default)]
    pub usage_tokens: u64,
    #[serde(default)]
    pub latency_ms: u64,
}

impl CompletionResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage_tokens: 0,
            latency_ms: 0,
        }
    }
}

/// Model name and decoding settings shared by every request of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for RequestParams {
    fn default() -> Self {
        Self {
            model: "mock".to_string(),
            temperature: 0.7,
            max_tokens: 512,
        }
    }
}

impl CompletionRequest {
    /// Single user turn carrying `prompt`.
    pub fn user(params: &RequestParams, prompt: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            model: params.model.clone(),
            messages: vec![Message {
                role: Role::User,
                content: prompt.into(),
            }],
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.messages.last() {
            None => Err(contract("request has no messages")),
            Some(m) if m.role != Role::User => Err(contract("final message must be from the user")),
            _ if !(0.0..=2.0).contains(&self.temperature) => Err(contract(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            ))),
            _ if self.max_tokens == 0 => Err(contract("max_tokens must be positive")),
            _ => Ok(()),
        }
    }

    /// Text of the final user message.
    pub fn prompt(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }

    /// SHA-256 over the canonical JSON form (object keys sorted), so the
    /// digest covers every field and ignores field order.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("request serializes");
        let canonical = serde_json::to_string(&value).expect("canonical json");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse>;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        (**self).complete(request)
    }
}

/// Validates the request, then delegates.
pub fn complete(backend: &dyn Backend, request: &CompletionRequest) -> Result<CompletionResponse> {
    request.validate()?;
    backend.complete(request)
}

/// Replies with a fixed list of texts in order, cycling when exhausted.
pub struct ScriptedBackend {
    texts: Vec<String>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        let texts: Vec<String> = texts.into_iter().map(Into::into).collect();
        assert!(!texts.is_empty(), "scripted backend needs at least one reply");
        Self {
            texts,
            cursor: Mutex::new(0),
        }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, _request: &CompletionRequest) -> Result<CompletionResponse> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let text = self.texts[*cursor % self.texts.len()].clone();
        *cursor += 1;
        Ok(CompletionResponse::text(text))
    }
}

/// Backend defined by a closure over the request.
pub struct FnBackend<F>(pub F);

impl<F> Backend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        (self.0)(request).map(CompletionResponse::text)
    }
}
