//! Completion backends.
//!
//! [`LlmBackend::generate`] draws up to `N` sampled completions for one
//! meta-prompt; [`LlmBackend::infer`] runs a single greedy completion for task
//! inference. Three implementations ship here: a chat-completions HTTP
//! client, a deterministic offline mock, and a fixture replayer (with a
//! recorder that captures fixtures from any other backend).

mod http;
mod mock;
mod replay;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, RetryPolicy, API_KEY_ENV};
pub use mock::MockBackend;
pub use replay::{FixtureMap, RecordingBackend, ReplayBackend};

pub const DEFAULT_MODEL_ID: &str = "meta-llama/Llama-3.3-70B-Instruct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub num_candidates_per_sample: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub model_id: String,
    #[serde(with = "millis")]
    pub request_timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            num_candidates_per_sample: 10,
            temperature: 1.0,
            top_p: 1.0,
            max_new_tokens: 256,
            model_id: DEFAULT_MODEL_ID.to_string(),
            request_timeout: Duration::from_secs(120),
            max_retries: 3,
            max_in_flight: 4,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::InvalidConfig(m.to_string()));
        if self.num_candidates_per_sample == 0 {
            return bad("num_candidates_per_sample must be at least 1");
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return bad("sampling temperature must be positive");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must be in (0, 1]");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        Ok(())
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionBatch {
    pub prompt_hash: String,
    pub completions: Vec<String>,
    pub usage: Usage,
    pub backend_id: String,
}

/// Why completion `index` of a batch is missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub index: usize,
    pub cause: String,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempts: {reason}")]
    BackendUnavailable { attempts: u32, reason: String },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("only {} of {} completions succeeded", .batch.completions.len(), .batch.completions.len() + .failures.len())]
    PartialBatch {
        batch: CompletionBatch,
        failures: Vec<ItemFailure>,
    },
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("unexpected response: {0}")]
    InvalidResponse(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("no recorded completions for prompt digest {0}")]
    ReplayMiss(String),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("fixture file {path}: {reason}")]
    Fixture { path: String, reason: String },
}

pub trait LlmBackend: Send + Sync {
    /// Stable identifier recorded in manifests.
    fn backend_id(&self) -> String;

    /// Up to `config.num_candidates_per_sample` sampled completions.
    fn generate(
        &self,
        prompt: &str,
        config: &GenerationConfig,
    ) -> Result<CompletionBatch, BackendError>;

    /// One greedy completion.
    fn infer(&self, task_prompt: &str, config: &GenerationConfig) -> Result<String, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn backend_id(&self) -> String {
        (**self).backend_id()
    }

    fn generate(
        &self,
        prompt: &str,
        config: &GenerationConfig,
    ) -> Result<CompletionBatch, BackendError> {
        (**self).generate(prompt, config)
    }

    fn infer(&self, task_prompt: &str, config: &GenerationConfig) -> Result<String, BackendError> {
        (**self).infer(task_prompt, config)
    }
}

pub(crate) fn check_request(prompt: &str, config: &GenerationConfig) -> Result<(), BackendError> {
    if prompt.trim().is_empty() {
        return Err(BackendError::EmptyPrompt);
    }
    config.validate()
}

/// Applies `f` to every item with at most `max_in_flight` calls running at
/// once. Results are returned in input order regardless of completion order.
pub fn fan_out<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = max_in_flight.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let result = f(item);
                slots.lock().expect("fan_out slot lock")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("fan_out slot lock")
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}
