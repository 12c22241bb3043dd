//! Chat-completion client with retries, usage accounting and record/replay.

mod cassette;
mod transport;
mod usage;

use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use cassette::{prompt_key, Cassette, CassetteEntry, CassetteError, CASSETTE_FORMAT, CASSETTE_VERSION};
pub use transport::{parse_chat_response, ChatRequest, ChatResponse, HttpTransport, Transport, TransportError};
pub use usage::{totals_by_stage, Stage, UsageEntry, UsageLedger, UsageTotals};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    #[default]
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub retries: u32,
    pub concurrency: usize,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub mode: GatewayMode,
    pub cassette: Option<PathBuf>,
    /// In replay mode, fail on prompts missing from the cassette instead of going live.
    pub strict: bool,
    pub backoff_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_tokens: 2048,
            timeout_secs: 120.0,
            retries: 3,
            concurrency: 50,
            api_key_env: "OPENAI_API_KEY".into(),
            mode: GatewayMode::Live,
            cassette: None,
            strict: true,
            backoff_ms: 500,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::Config(m.to_string()));
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be >= 0");
        }
        if self.concurrency < 1 {
            return bad("concurrency must be >= 1");
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return bad("timeout_secs must be > 0");
        }
        if self.mode != GatewayMode::Live && self.cassette.is_none() {
            return bad("record and replay modes need a cassette path");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid gateway config: {0}")]
    Config(String),
    #[error("transport failed after {attempts} attempt(s): {source}")]
    Transport { attempts: u32, source: TransportError },
    #[error("prompt {key} not found in cassette")]
    CassetteMiss { key: String },
    #[error(transparent)]
    Cassette(#[from] CassetteError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: UsageEntry,
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore { permits: Mutex::new(permits), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.cv.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Rough token count used when a call fails before the provider reports usage.
fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

struct Shared {
    config: GatewayConfig,
    transport: Arc<dyn Transport>,
    cassette: Option<Cassette>,
    semaphore: Semaphore,
}

/// Cheap to clone: clones share the transport, cassette and concurrency cap.
#[derive(Clone)]
pub struct Gateway {
    shared: Arc<Shared>,
    ledger: Arc<UsageLedger>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        Self::with_transport(config, Arc::new(HttpTransport))
    }

    pub fn with_transport(config: GatewayConfig, transport: Arc<dyn Transport>) -> Result<Self, GatewayError> {
        config.validate()?;
        let cassette = match (&config.mode, &config.cassette) {
            (GatewayMode::Live, _) | (_, None) => None,
            (_, Some(path)) => Some(Cassette::open(path)?),
        };
        let semaphore = Semaphore::new(config.concurrency);
        Ok(Gateway { shared: Arc::new(Shared { config, transport, cassette, semaphore }), ledger: Arc::new(UsageLedger::new()) })
    }

    /// A handle sharing everything but the usage ledger, which starts empty.
    pub fn scoped(&self) -> Gateway {
        Gateway { shared: Arc::clone(&self.shared), ledger: Arc::new(UsageLedger::new()) }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.shared.config
    }

    pub fn ledger(&self) -> &Arc<UsageLedger> {
        &self.ledger
    }

    pub fn cassette(&self) -> Option<&Cassette> {
        self.shared.cassette.as_ref()
    }

    pub fn complete(&self, stage: Stage, prompt: &str) -> Result<Completion, GatewayError> {
        let recorded = match self.shared.config.mode {
            GatewayMode::Live => None,
            GatewayMode::Record | GatewayMode::Replay => self.shared.cassette.as_ref().and_then(|c| c.get(prompt)),
        };
        if let Some(e) = recorded {
            return Ok(self.charge(stage, e.response, e.prompt_tokens, e.completion_tokens, e.latency_ms));
        }
        if self.shared.config.mode == GatewayMode::Replay && self.shared.config.strict {
            self.ledger.record(UsageEntry { stage, prompt_tokens: 0, completion_tokens: 0, latency_ms: 0, ok: false });
            return Err(GatewayError::CassetteMiss { key: prompt_key(prompt) });
        }
        let (resp, latency_ms) = self.call_live(stage, prompt)?;
        if self.shared.config.mode == GatewayMode::Record {
            let cassette = self.shared.cassette.as_ref().expect("record mode opens a cassette");
            let stored = cassette.insert(CassetteEntry {
                key: prompt_key(prompt),
                prompt: prompt.to_string(),
                response: resp.text,
                prompt_tokens: resp.prompt_tokens,
                completion_tokens: resp.completion_tokens,
                latency_ms,
            })?;
            return Ok(self.charge(stage, stored.response, stored.prompt_tokens, stored.completion_tokens, stored.latency_ms));
        }
        Ok(self.charge(stage, resp.text, resp.prompt_tokens, resp.completion_tokens, latency_ms))
    }

    fn charge(&self, stage: Stage, text: String, prompt_tokens: u64, completion_tokens: u64, latency_ms: u64) -> Completion {
        let usage = UsageEntry { stage, prompt_tokens, completion_tokens, latency_ms, ok: true };
        self.ledger.record(usage);
        Completion { text, usage }
    }

    fn call_live(&self, stage: Stage, prompt: &str) -> Result<(ChatResponse, u64), GatewayError> {
        let _permit = self.shared.semaphore.acquire();
        let req = ChatRequest {
            endpoint: self.shared.config.endpoint.clone(),
            model: self.shared.config.model.clone(),
            prompt: prompt.to_string(),
            temperature: self.shared.config.temperature,
            max_tokens: self.shared.config.max_tokens,
            timeout: Duration::from_secs_f64(self.shared.config.timeout_secs),
            api_key: std::env::var(&self.shared.config.api_key_env).ok(),
        };
        let start = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.shared.transport.send(&req) {
                Ok(resp) => return Ok((resp, start.elapsed().as_millis() as u64)),
                Err(e) if e.retryable() && attempt <= self.shared.config.retries => {
                    log::warn!("model call failed (attempt {attempt}): {e}");
                    std::thread::sleep(self.backoff(attempt));
                }
                Err(e) => {
                    self.ledger.record(UsageEntry {
                        stage,
                        prompt_tokens: estimate_tokens(prompt),
                        completion_tokens: 0,
                        latency_ms: start.elapsed().as_millis() as u64,
                        ok: false,
                    });
                    return Err(GatewayError::Transport { attempts: attempt, source: e });
                }
            }
        }
    }

    /// Exponential backoff; jitter only for live traffic.
    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.shared.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
        let jitter = if self.shared.config.mode == GatewayMode::Live { rand::random_range(0..=base / 2) } else { 0 };
        Duration::from_millis(base + jitter)
    }
}

#[cfg(test)]
mod tests;
