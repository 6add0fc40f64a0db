//! Sends rendered prompts to a model backend and records every exchange.
//!
//! Three backends share one interface: a live OpenAI-compatible endpoint, a
//! replay store built from an earlier exchange log, and a deterministic
//! offline oracle.

mod http;
mod log;
mod oracle;
mod ratelimit;

use std::path::PathBuf;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::prompt::{PromptKind, RenderedPrompt};

pub use log::{read_exchanges, ExchangeLog, ReplayStore};
pub use oracle::{
    extract_prompt_series, oracle_forecast, oracle_respond, FaultDraw, OracleError, OracleFaults,
    HOURLY_PERIOD_HINT,
};
pub use ratelimit::RateLimiter;

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini-2024-07-18";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("no recorded response for sample {sample_id} under {method}")]
    ReplayGap { sample_id: String, method: PromptKind },
    #[error("exchange log: {0}")]
    Io(String),
}

fn default_endpoint() -> String {
    DEFAULT_ENDPOINT.into()
}
fn default_model() -> String {
    DEFAULT_MODEL.into()
}
fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    3
}
fn default_rate() -> f64 {
    60.0
}
fn default_backoff() -> u64 {
    1000
}
fn default_key_env() -> Option<String> {
    Some("OPENAI_API_KEY".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpSettings {
    #[serde(default = "default_endpoint")]
    pub endpoint_url: String,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
    /// Retries after the first attempt.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Zero disables pacing.
    #[serde(default = "default_rate")]
    pub rate_limit_per_minute: f64,
    #[serde(default = "default_key_env")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            endpoint_url: default_endpoint(),
            model_name: default_model(),
            temperature: 0.0,
            request_timeout_secs: default_timeout(),
            max_retries: default_retries(),
            rate_limit_per_minute: default_rate(),
            api_key_env: default_key_env(),
            backoff_base_ms: default_backoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Http(HttpSettings),
    Replay { replay_path: PathBuf },
    Oracle(OracleFaults),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Oracle(OracleFaults::none(0))
    }
}

impl BackendConfig {
    pub fn kind(&self) -> BackendKind {
        match self {
            BackendConfig::Http(_) => BackendKind::Http,
            BackendConfig::Replay { .. } => BackendKind::Replay,
            BackendConfig::Oracle(_) => BackendKind::Oracle,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self {
            BackendConfig::Http(s) => {
                if s.endpoint_url.trim().is_empty() {
                    return Err(GatewayError::Config("endpoint_url is empty".into()));
                }
                if s.model_name.trim().is_empty() {
                    return Err(GatewayError::Config("model_name is empty".into()));
                }
                if !(s.request_timeout_secs > 0.0 && s.request_timeout_secs.is_finite()) {
                    return Err(GatewayError::Config("request_timeout_secs must be positive".into()));
                }
                if !(s.rate_limit_per_minute >= 0.0 && s.rate_limit_per_minute.is_finite()) {
                    return Err(GatewayError::Config("rate_limit_per_minute must be non-negative".into()));
                }
                if !(0.0..=2.0).contains(&s.temperature) {
                    return Err(GatewayError::Config("temperature must lie in [0, 2]".into()));
                }
                Ok(())
            }
            BackendConfig::Replay { replay_path } => {
                if replay_path.as_os_str().is_empty() {
                    Err(GatewayError::Config("replay_path is empty".into()))
                } else {
                    Ok(())
                }
            }
            BackendConfig::Oracle(f) => f.validate().map_err(GatewayError::Config),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Replay,
    Oracle,
}

/// One prompt and the model's reply, as persisted in the exchange log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExchange {
    pub sample_id: String,
    pub method: PromptKind,
    pub prompt_text: String,
    pub raw_response: String,
    pub backend: BackendKind,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub created_at: DateTime<Utc>,
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ModelExchange {
    pub fn is_success(&self) -> bool {
        self.error.is_none()
    }
}

enum Backend {
    Http(Box<http::HttpBackend>, HttpSettings),
    Replay(ReplayStore),
    Oracle(OracleFaults),
}

/// Thread-safe front for one backend plus an optional exchange log.
pub struct Gateway {
    backend: Backend,
    log: Option<ExchangeLog>,
}

impl Gateway {
    pub fn new(config: &BackendConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend = match config {
            BackendConfig::Http(s) => Backend::Http(Box::new(http::HttpBackend::new(s)?), s.clone()),
            BackendConfig::Replay { replay_path } => Backend::Replay(ReplayStore::load(replay_path)?),
            BackendConfig::Oracle(f) => Backend::Oracle(*f),
        };
        Ok(Self { backend, log: None })
    }

    pub fn with_log(mut self, log: ExchangeLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn kind(&self) -> BackendKind {
        match self.backend {
            Backend::Http(..) => BackendKind::Http,
            Backend::Replay(_) => BackendKind::Replay,
            Backend::Oracle(_) => BackendKind::Oracle,
        }
    }

    /// Obtain a response for `prompt`. The exchange is written to the log
    /// before this returns, including failed ones; only a replay miss is
    /// reported as an error after being logged.
    pub fn complete(&self, prompt: &RenderedPrompt) -> Result<ModelExchange, GatewayError> {
        let started = Instant::now();
        let mut exchange = ModelExchange {
            sample_id: prompt.sample_id.clone(),
            method: prompt.method,
            prompt_text: prompt.text.clone(),
            raw_response: String::new(),
            backend: self.kind(),
            latency_ms: 0,
            attempt_count: 1,
            created_at: Utc::now(),
            max_output_tokens: prompt.max_output_tokens,
            model: None,
            temperature: None,
            error: None,
        };
        let mut gap = false;
        match &self.backend {
            Backend::Http(client, settings) => {
                let outcome = client.complete(&prompt.text, prompt.max_output_tokens);
                exchange.raw_response = outcome.text;
                exchange.attempt_count = outcome.attempts;
                exchange.error = outcome.error;
                exchange.model = Some(settings.model_name.clone());
                exchange.temperature = Some(settings.temperature);
            }
            Backend::Replay(store) => match store.get(&prompt.sample_id, prompt.method) {
                Some(recorded) => {
                    if recorded.prompt_text != prompt.text {
                        tracing::warn!(
                            sample = %prompt.sample_id,
                            method = %prompt.method,
                            "replayed prompt text differs from the rendered prompt"
                        );
                    }
                    exchange.raw_response = recorded.raw_response.clone();
                    exchange.error = recorded.error.clone();
                    exchange.model = recorded.model.clone();
                    exchange.temperature = recorded.temperature;
                }
                None => {
                    gap = true;
                    exchange.error = Some("no recorded response".into());
                }
            },
            Backend::Oracle(faults) => match oracle_respond(prompt, faults) {
                Ok(text) => exchange.raw_response = text,
                Err(e) => exchange.error = Some(e.to_string()),
            },
        }
        exchange.latency_ms = started.elapsed().as_millis() as u64;
        if let Some(log) = &self.log {
            log.append(&exchange)?;
        }
        if gap {
            return Err(GatewayError::ReplayGap {
                sample_id: prompt.sample_id.clone(),
                method: prompt.method,
            });
        }
        Ok(exchange)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(id: &str) -> RenderedPrompt {
        RenderedPrompt {
            text: "Q: the values were 1, 2, 3, 4, 5, 6 on each day. Please answer the predicted value only.".into(),
            method: PromptKind::Baseline,
            max_output_tokens: 1024,
            sample_id: id.into(),
            horizon: 1,
        }
    }

    #[test]
    fn config_parses_from_toml() {
        let c: BackendConfig = toml::from_str("kind = \"oracle\"\np_arith_slip = 0.1\nseed = 4").unwrap();
        assert_eq!(c, BackendConfig::Oracle(OracleFaults { p_arith_slip: 0.1, seed: 4, ..Default::default() }));
        let c: BackendConfig = toml::from_str("kind = \"http\"\nmax_retries = 1").unwrap();
        let BackendConfig::Http(s) = c else { panic!() };
        assert_eq!((s.max_retries, s.model_name.as_str()), (1, DEFAULT_MODEL));
        assert!(toml::from_str::<BackendConfig>("kind = \"oracle\"\nbogus = 1").is_err());
        assert!(toml::from_str::<BackendConfig>("kind = \"carrier-pigeon\"").is_err());
    }

    #[test]
    fn oracle_exchanges_are_logged_and_replayable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex.jsonl");
        let gw = Gateway::new(&BackendConfig::default())
            .unwrap()
            .with_log(ExchangeLog::open(&path).unwrap());
        let a = gw.complete(&prompt("a")).unwrap();
        assert!(a.raw_response.ends_with("****Final Answer**** 7"), "{}", a.raw_response);

        let replay = Gateway::new(&BackendConfig::Replay { replay_path: path.clone() }).unwrap();
        assert_eq!(replay.complete(&prompt("a")).unwrap().raw_response, a.raw_response);
        assert_eq!(
            replay.complete(&prompt("b")),
            Err(GatewayError::ReplayGap { sample_id: "b".into(), method: PromptKind::Baseline })
        );
        assert_eq!(read_exchanges(&path).unwrap().len(), 1);
    }

    #[test]
    fn replay_without_store_is_config_error() {
        let r = Gateway::new(&BackendConfig::Replay { replay_path: "/nonexistent/x.jsonl".into() });
        assert!(matches!(r, Err(GatewayError::Config(_))));
    }

    #[test]
    fn torn_last_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex.jsonl");
        let gw = Gateway::new(&BackendConfig::default())
            .unwrap()
            .with_log(ExchangeLog::open(&path).unwrap());
        gw.complete(&prompt("a")).unwrap();
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .and_then(|mut f| std::io::Write::write_all(&mut f, b"{\"sample_id\":\"b\",\"met"))
            .unwrap();
        assert_eq!(read_exchanges(&path).unwrap().len(), 1);
    }
}
