//! OpenAI-compatible chat-completions client: one user message per request,
//! bounded retries with jittered exponential backoff, token-bucket pacing.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ratelimit::RateLimiter;
use super::{GatewayError, HttpSettings};

const MAX_BACKOFF: Duration = Duration::from_secs(60);

#[derive(Debug, Serialize)]
pub(crate) struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: [ChatMessage<'a>; 1],
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Serialize)]
pub(crate) struct ChatMessage<'a> {
    pub role: &'static str,
    pub content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

/// Outcome of one logical request after all attempts.
pub(crate) struct HttpOutcome {
    pub text: String,
    pub attempts: u32,
    pub error: Option<String>,
}

pub(crate) struct HttpBackend {
    settings: HttpSettings,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    limiter: Option<RateLimiter>,
}

impl HttpBackend {
    pub fn new(settings: &HttpSettings) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(settings.request_timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        let api_key = settings.api_key_env.as_deref().and_then(|var| match std::env::var(var) {
            Ok(key) if !key.is_empty() => Some(key),
            _ => {
                tracing::warn!(var, "API key variable not set; sending requests without authorization");
                None
            }
        });
        let limiter = (settings.rate_limit_per_minute > 0.0)
            .then(|| RateLimiter::per_minute(settings.rate_limit_per_minute));
        Ok(Self {
            settings: settings.clone(),
            client,
            api_key,
            limiter,
        })
    }

    fn send_once(&self, prompt: &str, max_tokens: u32) -> Result<String, Failure> {
        let body = ChatRequest {
            model: &self.settings.model_name,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            max_tokens,
            temperature: self.settings.temperature,
        };
        let mut req = self.client.post(&self.settings.endpoint_url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retryable(format!("transport: {e}")))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| Failure::Retryable(format!("reading body: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Retryable(format!("HTTP {status}: {}", truncate(&text))));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(format!("HTTP {status}: {}", truncate(&text))));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Failure::Fatal("response has no message content".into()))
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.settings.backoff_base_ms as f64 * 2f64.powi(attempt.saturating_sub(1) as i32);
        let jitter = rand::rng().random_range(0.5..1.5);
        Duration::from_secs_f64(base * jitter / 1000.0).min(MAX_BACKOFF)
    }

    pub fn complete(&self, prompt: &str, max_tokens: u32) -> HttpOutcome {
        let total = self.settings.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=total {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            match self.send_once(prompt, max_tokens) {
                Ok(text) => {
                    return HttpOutcome {
                        text,
                        attempts: attempt,
                        error: None,
                    }
                }
                Err(Failure::Fatal(e)) => {
                    return HttpOutcome {
                        text: String::new(),
                        attempts: attempt,
                        error: Some(e),
                    }
                }
                Err(Failure::Retryable(e)) => {
                    tracing::debug!(attempt, "retryable failure: {e}");
                    last_error = e;
                    if attempt < total {
                        std::thread::sleep(self.backoff(attempt));
                    }
                }
            }
        }
        HttpOutcome {
            text: String::new(),
            attempts: total,
            error: Some(format!("retries exhausted: {last_error}")),
        }
    }
}

fn truncate(text: &str) -> &str {
    let end = text.char_indices().nth(200).map_or(text.len(), |(i, _)| i);
    &text[..end]
}
