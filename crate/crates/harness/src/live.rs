//! HTTP chat-completion client for OpenAI-compatible endpoints.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use bbo_core::backend::{Backend, CompletionRequest, CompletionResponse};
use bbo_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::BackendConfig;

pub const MAX_ATTEMPTS: u32 = 3;

/// Token bucket shared by every cell; capacity one second of requests.
pub struct RateLimiter {
    rps: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(rps: f64) -> Self {
        assert!(rps > 0.0, "rps must be positive");
        Self {
            rps,
            state: Mutex::new((rps.max(1.0), Instant::now())),
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("limiter lock");
                let (tokens, last) = &mut *state;
                let now = Instant::now();
                *tokens =
                    (*tokens + now.duration_since(*last).as_secs_f64() * self.rps).min(self.rps.max(1.0));
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                (1.0 - *tokens) / self.rps
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

pub struct LiveBackend {
    agent: ureq::Agent,
    url: String,
    api_key: String,
    limiter: RateLimiter,
    backoff: Duration,
}

impl LiveBackend {
    /// Reads the credential from the configured environment variable.
    pub fn from_config(cfg: &BackendConfig) -> Result<Self> {
        let api_key = std::env::var(&cfg.api_key_env).map_err(|_| {
            Error::BackendUnavailable(format!("environment variable {} is not set", cfg.api_key_env))
        })?;
        Ok(Self::new(
            &cfg.base_url,
            api_key,
            cfg.rps,
            Duration::from_secs(cfg.timeout_secs),
        ))
    }

    pub fn new(base_url: &str, api_key: String, rps: f64, timeout: Duration) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            limiter: RateLimiter::new(rps),
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &Value) -> std::result::Result<CompletionResponse, String> {
        self.limiter.acquire();
        let start = Instant::now();
        let reply: Value = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body.clone())
            .map_err(|e| e.to_string())?
            .into_json()
            .map_err(|e| e.to_string())?;
        let text = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| format!("response without choices[0].message.content: {reply}"))?;
        Ok(CompletionResponse {
            text: text.to_string(),
            usage_tokens: reply["usage"]["total_tokens"].as_u64().unwrap_or(0),
            latency_ms: start.elapsed().as_millis() as u64,
        })
    }
}

pub fn request_body(request: &CompletionRequest) -> Value {
    let mut body = json!({
        "model": request.model,
        "messages": request.messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    });
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    body
}

impl Backend for LiveBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        let body = request_body(request);
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(r) => return Ok(r),
                Err(e) => last = e,
            }
        }
        Err(Error::BackendUnavailable(format!(
            "{} failed after {MAX_ATTEMPTS} attempts: {last}",
            self.url
        )))
    }
}
