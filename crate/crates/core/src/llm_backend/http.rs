//! Chat-completions HTTP client with retry and exponential backoff.

use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{
    check_request, BackendError, CompletionBatch, GenerationConfig, ItemFailure, LlmBackend, Usage,
};
use crate::digest::sha256_hex;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32, retry_after: Option<Duration>) -> Duration {
        let backoff = self
            .base_delay
            .saturating_mul(2u32.saturating_pow(attempt))
            .min(self.max_delay);
        retry_after.map_or(backoff, |ra| ra.min(self.max_delay))
    }
}

pub struct HttpBackend {
    client: Client,
    endpoint: String,
    api_key: String,
    retry: RetryPolicy,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    top_p: f64,
    n: usize,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: usize,
    message: Option<ChoiceMessage>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

enum Attempt {
    Retry {
        reason: String,
        timed_out: bool,
        retry_after: Option<Duration>,
    },
    Fatal(BackendError),
}

impl HttpBackend {
    /// `base_url` is the API root, e.g. `https://host/v1`; requests go to
    /// `{base_url}/chat/completions`.
    pub fn new(base_url: &str, api_key: impl Into<String>) -> Result<Self, BackendError> {
        let api_key = api_key.into();
        if api_key.trim().is_empty() {
            return Err(BackendError::AuthError(format!("{API_KEY_ENV} is empty")));
        }
        let client = Client::builder()
            .build()
            .map_err(|e| BackendError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            retry: RetryPolicy::default(),
        })
    }

    /// Reads the credential from `LLM_API_KEY`.
    pub fn from_env(base_url: &str) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| BackendError::AuthError(format!("{API_KEY_ENV} is not set")))?;
        Self::new(base_url, key)
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn send_once(
        &self,
        body: &ChatRequest<'_>,
        timeout: Duration,
    ) -> Result<ChatResponse, Attempt> {
        let response: Response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| Attempt::Retry {
                timed_out: e.is_timeout(),
                reason: e.to_string(),
                retry_after: None,
            })?;

        let status = response.status();
        if status.is_success() {
            return response.json::<ChatResponse>().map_err(|e| {
                if e.is_timeout() {
                    Attempt::Retry {
                        timed_out: true,
                        reason: e.to_string(),
                        retry_after: None,
                    }
                } else {
                    Attempt::Fatal(BackendError::InvalidResponse(e.to_string()))
                }
            });
        }

        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response.text().unwrap_or_default();
        Err(match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Attempt::Fatal(BackendError::AuthError(format!("status {status}")))
            }
            StatusCode::REQUEST_TIMEOUT | StatusCode::TOO_MANY_REQUESTS => Attempt::Retry {
                reason: format!("status {status}"),
                timed_out: false,
                retry_after,
            },
            s if s.is_server_error() => Attempt::Retry {
                reason: format!("status {status}"),
                timed_out: false,
                retry_after,
            },
            s => Attempt::Fatal(BackendError::Rejected {
                status: s.as_u16(),
                body: text,
            }),
        })
    }

    fn send(
        &self,
        body: &ChatRequest<'_>,
        config: &GenerationConfig,
    ) -> Result<ChatResponse, BackendError> {
        let attempts = config.max_retries + 1;
        let mut last_reason = String::new();
        let mut last_timed_out = false;
        for attempt in 0..attempts {
            match self.send_once(body, config.request_timeout) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry {
                    reason,
                    timed_out,
                    retry_after,
                }) => {
                    last_reason = reason;
                    last_timed_out = timed_out;
                    if attempt + 1 < attempts {
                        std::thread::sleep(self.retry.delay(attempt, retry_after));
                    }
                }
            }
        }
        Err(if last_timed_out {
            BackendError::Timeout { attempts }
        } else {
            BackendError::BackendUnavailable {
                attempts,
                reason: last_reason,
            }
        })
    }
}

impl LlmBackend for HttpBackend {
    fn backend_id(&self) -> String {
        "http".to_string()
    }

    fn generate(
        &self,
        prompt: &str,
        config: &GenerationConfig,
    ) -> Result<CompletionBatch, BackendError> {
        check_request(prompt, config)?;
        let wanted = config.num_candidates_per_sample;
        let mut completions: Vec<String> = Vec::with_capacity(wanted);
        let mut usage = Usage::default();
        let mut failure: Option<String> = None;
        let mut empty_rounds = 0;

        // Endpoints may return fewer choices than `n`; top up the remainder
        // with further requests, never taking more than what is still missing.
        while completions.len() < wanted {
            let body = ChatRequest {
                model: &config.model_id,
                messages: [Message {
                    role: "user",
                    content: prompt,
                }],
                temperature: config.temperature,
                top_p: config.top_p,
                n: wanted - completions.len(),
                max_tokens: config.max_new_tokens,
            };
            match self.send(&body, config) {
                Ok(mut resp) => {
                    usage += resp.usage.unwrap_or_default();
                    resp.choices.sort_by_key(|c| c.index);
                    let before = completions.len();
                    completions.extend(
                        resp.choices
                            .into_iter()
                            .filter_map(|c| c.message.and_then(|m| m.content))
                            .take(wanted - before),
                    );
                    if completions.len() == before {
                        empty_rounds += 1;
                        if empty_rounds > config.max_retries {
                            failure = Some("endpoint returned no usable choices".into());
                            break;
                        }
                    }
                }
                Err(e @ BackendError::AuthError(_)) => return Err(e),
                Err(e) if completions.is_empty() => return Err(e),
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }

        let batch = CompletionBatch {
            prompt_hash: sha256_hex(prompt),
            completions,
            usage,
            backend_id: self.backend_id(),
        };
        match failure {
            Some(cause) if batch.completions.len() < wanted => {
                let failures = (batch.completions.len()..wanted)
                    .map(|index| ItemFailure {
                        index,
                        cause: cause.clone(),
                    })
                    .collect();
                Err(BackendError::PartialBatch { batch, failures })
            }
            _ => Ok(batch),
        }
    }

    fn infer(&self, task_prompt: &str, config: &GenerationConfig) -> Result<String, BackendError> {
        if task_prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let body = ChatRequest {
            model: &config.model_id,
            messages: [Message {
                role: "user",
                content: task_prompt,
            }],
            temperature: 0.0,
            top_p: 1.0,
            n: 1,
            max_tokens: config.max_new_tokens,
        };
        let resp = self.send(&body, config)?;
        resp.choices
            .into_iter()
            .min_by_key(|c| c.index)
            .and_then(|c| c.message)
            .and_then(|m| m.content)
            .ok_or_else(|| BackendError::InvalidResponse("response has no message content".into()))
    }
}
