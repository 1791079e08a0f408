//! Chat-completion gateway: one provider behind retries, backoff and a
//! concurrency bound.

pub mod http;
pub mod loopback;
pub mod mock;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpProvider, HttpProviderConfig};
pub use mock::{mock_answer_sheet, MockConfig, MockNoise, MockPersonaModel, MockProvider, Tail};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;

/// Markers that delimit the persona text inside a system prompt.
pub const PERSONA_BEGIN: &str = "<persona>";
pub const PERSONA_END: &str = "</persona>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Correlation id, echoed into logs.
    pub tag: String,
    /// Sampling seed forwarded to providers that accept one.
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(system_text: impl Into<String>, user_text: impl Into<String>) -> ChatRequest {
        ChatRequest {
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            tag: String::new(),
            seed: None,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> ChatRequest {
        self.tag = tag.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> ChatRequest {
        self.seed = Some(seed);
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<ChatRequest, GatewayError> {
        self.temperature = temperature;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub provider: String,
    pub latency_ms: u64,
    /// 1 on first-try success.
    pub attempt: u32,
}

/// Failure reported by a provider for a single attempt.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed provider reply: {0}")]
    Malformed(String),
    #[error("provider error: {0}")]
    Fatal(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// One chat backend. Implementations perform a single attempt; retrying is
/// the gateway's job.
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;
    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError>;

    /// Offline providers report zero latency so stored runs are reproducible.
    fn reports_latency(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// Maximum in-flight requests.
    pub concurrency: usize,
    pub timeout_secs: u64,
    /// Overrides the sampling temperature of every request when set.
    pub temperature: Option<f64>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            max_retries: 3,
            base_backoff_ms: 500,
            max_backoff_ms: 30_000,
            concurrency: 4,
            timeout_secs: 120,
            temperature: None,
        }
    }
}

impl GatewayConfig {
    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Counting semaphore.
struct Semaphore {
    state: Mutex<SemState>,
    cv: Condvar,
}

struct SemState {
    available: usize,
    in_flight: usize,
    peak: usize,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            state: Mutex::new(SemState { available: permits.max(1), in_flight: 0, peak: 0 }),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        while s.available == 0 {
            s = self.cv.wait(s).unwrap_or_else(|e| e.into_inner());
        }
        s.available -= 1;
        s.in_flight += 1;
        s.peak = s.peak.max(s.in_flight);
        Permit { sem: self }
    }
}

struct Permit<'a> {
    sem: &'a Semaphore,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut s = self.sem.state.lock().unwrap_or_else(|e| e.into_inner());
        s.available += 1;
        s.in_flight -= 1;
        self.sem.cv.notify_one();
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Shareable client over one provider.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    config: GatewayConfig,
    sem: Arc<Semaphore>,
    sleeper: Sleeper,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>, config: GatewayConfig) -> Gateway {
        let sem = Arc::new(Semaphore::new(config.concurrency));
        Gateway { provider, config, sem, sleeper: Arc::new(std::thread::sleep) }
    }

    /// Replaces the backoff sleep, e.g. with a recorder in tests.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Gateway {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// Highest number of simultaneous in-flight requests seen so far.
    pub fn peak_in_flight(&self) -> usize {
        self.sem.state.lock().unwrap_or_else(|e| e.into_inner()).peak
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let overridden;
        let request = match self.config.temperature {
            Some(t) if t != request.temperature => {
                overridden = ChatRequest { temperature: t, ..request.clone() };
                &overridden
            }
            _ => request,
        };
        request.validate()?;
        let max_attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = Instant::now();
            let result = {
                let _permit = self.sem.acquire();
                self.provider.send(request)
            };
            match result {
                Ok(text) => {
                    return Ok(ChatResponse {
                        text,
                        provider: self.provider.name().to_string(),
                        latency_ms: if self.provider.reports_latency() {
                            started.elapsed().as_millis() as u64
                        } else {
                            0
                        },
                        attempt,
                    })
                }
                Err(ProviderError::Transient(msg)) => {
                    log::warn!("request {:?} attempt {attempt} failed: {msg}", request.tag);
                    if attempt >= max_attempts {
                        return Err(GatewayError::RetriesExhausted { attempts: attempt, last: msg });
                    }
                    (self.sleeper)(self.config.backoff(attempt));
                }
                Err(ProviderError::Auth(msg)) => return Err(GatewayError::Auth(msg)),
                Err(ProviderError::Malformed(msg)) => return Err(GatewayError::Malformed(msg)),
                Err(ProviderError::Fatal(msg)) => return Err(GatewayError::Fatal(msg)),
            }
        }
    }
}

/// Provider that replays a fixed script of results, then repeats the last one.
pub struct ScriptedProvider {
    script: Mutex<Vec<Result<String, ProviderError>>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(script: Vec<Result<String, ProviderError>>) -> ScriptedProvider {
        assert!(!script.is_empty(), "script must not be empty");
        let mut script = script;
        script.reverse();
        ScriptedProvider { script: Mutex::new(script), seen: Mutex::new(Vec::new()) }
    }

    /// Requests received so far.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl ChatProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.seen.lock().unwrap().push(request.clone());
        let mut script = self.script.lock().unwrap();
        if script.len() > 1 {
            script.pop().unwrap()
        } else {
            script[0].clone()
        }
    }
}
