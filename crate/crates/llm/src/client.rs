//! Blocking chat-completion client with retries, a concurrency gate, a
//! request-rate limit and an append-only transcript.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::prompt::Message;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request failed after {attempts} attempt(s): {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("endpoint rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("could not build the HTTP client: {0}")]
    Client(String),
    #[error("transcript: {0}")]
    Transcript(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Base URL up to and excluding `/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Sampling temperature for proposals.
    pub temperature: f64,
    /// Sampling temperature for rubric scoring.
    pub judge_temperature: f64,
    pub max_tokens: u32,
    /// Maximum number of requests in flight.
    pub concurrency: usize,
    /// Requests per second; `None` disables limiting.
    pub rate_limit: Option<f64>,
    pub timeout_secs: u64,
    /// First backoff delay; doubled after every transient failure.
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.7,
            judge_temperature: 0.0,
            max_tokens: 2048,
            concurrency: 4,
            rate_limit: None,
            timeout_secs: 120,
            backoff_ms: 500,
            max_backoff_ms: 30_000,
            api_key_env: "SYMLAW_API_KEY".into(),
        }
    }
}

/// Assistant text together with the number of requests it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

/// Anything that answers chat messages.
pub trait ChatModel: Send + Sync {
    /// Sends `messages`, retrying transient failures; at most `max_attempts`
    /// requests are made.
    fn complete(&self, messages: &[Message], temperature: f64, max_attempts: u32) -> Result<Completion, LlmError>;

    /// Total requests issued so far.
    fn requests(&self) -> u64;
}

struct Gate {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Spaces requests at least `1 / rate` seconds apart.
struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn wait(&self) {
        let Some(interval) = self.interval else { return };
        let slot = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

enum Failure {
    Transient(String),
    Fatal(LlmError),
}

pub struct ChatClient {
    cfg: ModelConfig,
    http: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: Gate,
    limiter: RateLimiter,
    transcript: Option<Mutex<BufWriter<File>>>,
    requests: AtomicU64,
}

impl ChatClient {
    pub fn new(cfg: ModelConfig) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build()
            .map_err(|e| LlmError::Client(e.to_string()))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let interval = cfg
            .rate_limit
            .filter(|r| *r > 0.0)
            .map(|r| Duration::from_secs_f64(1.0 / r));
        Ok(ChatClient {
            gate: Gate {
                limit: cfg.concurrency.max(1),
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
            },
            limiter: RateLimiter {
                interval,
                next: Mutex::new(None),
            },
            cfg,
            http,
            api_key,
            transcript: None,
            requests: AtomicU64::new(0),
        })
    }

    /// Appends every exchange to `path` as one JSON object per line.
    pub fn with_transcript(mut self, path: &Path) -> Result<Self, LlmError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.transcript = Some(Mutex::new(BufWriter::new(file)));
        Ok(self)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn log(&self, entry: Value) {
        if let Some(t) = &self.transcript {
            let mut w = t.lock().unwrap();
            let ok = writeln!(w, "{entry}").and_then(|_| w.flush());
            if let Err(e) = ok {
                log::warn!("transcript write failed: {e}");
            }
        }
    }

    fn send_once(&self, body: &Value) -> Result<String, Failure> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut req = self.http.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Transient(format!("status {}: {text}", status.as_u16())));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(LlmError::Rejected {
                status: status.as_u16(),
                body: text,
            }));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Transient(format!("invalid response body: {e}")))?;
        let content = v["choices"][0]["message"]["content"].as_str().unwrap_or("").to_string();
        if content.trim().is_empty() {
            return Err(Failure::Transient("empty completion".into()));
        }
        Ok(content)
    }
}

impl ChatModel for ChatClient {
    fn complete(&self, messages: &[Message], temperature: f64, max_attempts: u32) -> Result<Completion, LlmError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut last = String::from("no attempt made");
        for attempt in 1..=max_attempts {
            let slot = self.gate.enter();
            self.limiter.wait();
            let n = self.requests.fetch_add(1, Ordering::SeqCst) + 1;
            let outcome = self.send_once(&body);
            match &outcome {
                Ok(text) => self.log(json!({"request": n, "attempt": attempt, "body": body, "reply": text})),
                Err(Failure::Transient(e)) => self.log(json!({"request": n, "attempt": attempt, "body": body, "error": e})),
                Err(Failure::Fatal(e)) => {
                    self.log(json!({"request": n, "attempt": attempt, "body": body, "error": e.to_string()}))
                }
            }
            match outcome {
                Ok(text) => return Ok(Completion { text, attempts: attempt }),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(e)) => {
                    log::warn!("attempt {attempt}/{max_attempts} failed: {e}");
                    last = e;
                }
            }
            drop(slot);
            if attempt < max_attempts {
                thread::sleep(delay);
                delay = (delay * 2).min(Duration::from_millis(self.cfg.max_backoff_ms));
            }
        }
        Err(LlmError::Exhausted {
            attempts: max_attempts,
            last,
        })
    }

    fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }
}
