//! Refinement transports: offline replay, recording, and a live HTTP client
//! with retries and a shared rate limiter.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use agmg_core::refine::{RefineTransport, TransportError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::io::{read_jsonl, write_jsonl, FileError};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn prompt_sha256(prompt: &str) -> String {
    sha256_hex(prompt.as_bytes())
}

/// One recorded exchange.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub prompt_sha256: String,
    pub response: String,
}

/// Answers prompts from recorded responses.
#[derive(Clone, Debug, Default)]
pub struct ReplayTransport {
    responses: HashMap<String, String>,
}

impl ReplayTransport {
    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        ReplayTransport { responses: records.into_iter().map(|r| (r.prompt_sha256, r.response)).collect() }
    }

    pub fn read(path: &Path) -> Result<Self, FileError> {
        Ok(Self::from_records(read_jsonl::<FixtureRecord>(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl RefineTransport for ReplayTransport {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let key = prompt_sha256(prompt);
        self.responses.get(&key).cloned().ok_or(TransportError::MissingFixture(key))
    }
}

/// Forwards to another transport and keeps every exchange for a fixture file.
pub struct RecordingTransport<T> {
    inner: T,
    records: Mutex<BTreeMap<String, String>>,
}

impl<T: RefineTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport { inner, records: Mutex::new(BTreeMap::new()) }
    }

    /// Recorded exchanges, ordered by prompt hash.
    pub fn records(&self) -> Vec<FixtureRecord> {
        let records = self.records.lock().expect("recorder lock");
        records.iter().map(|(k, v)| FixtureRecord { prompt_sha256: k.clone(), response: v.clone() }).collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), FileError> {
        write_jsonl(path, &self.records())
    }
}

impl<T: RefineTransport> RefineTransport for RecordingTransport<T> {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let response = self.inner.complete(prompt)?;
        self.records.lock().expect("recorder lock").insert(prompt_sha256(prompt), response.clone());
        Ok(response)
    }
}

/// Spaces requests evenly; safe to share between threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    /// `0` disables limiting.
    pub fn per_minute(requests: u32) -> Self {
        let interval = if requests == 0 { Duration::ZERO } else { Duration::from_secs(60) / requests };
        RateLimiter { interval, next: Mutex::new(None) }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks until the caller's slot.
    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next.lock().expect("limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub requests_per_minute: u32,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub initial_backoff_ms: u64,
    pub temperature: f64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://generativelanguage.googleapis.com/v1beta".into(),
            model: "gemini-2.5-flash".into(),
            api_key_env: "GEMINI_API_KEY".into(),
            requests_per_minute: 60,
            timeout_secs: 120,
            attempts: 3,
            initial_backoff_ms: 1000,
            temperature: 0.0,
        }
    }
}

/// Gemini `generateContent` client.
pub struct LiveTransport {
    cfg: LiveConfig,
    key: String,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl LiveTransport {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(cfg: LiveConfig) -> Result<Self, TransportError> {
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| TransportError::Other(format!("environment variable {} is not set", cfg.api_key_env)))?;
        Ok(Self::with_key(cfg, key))
    }

    pub fn with_key(cfg: LiveConfig, key: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        let limiter = RateLimiter::per_minute(cfg.requests_per_minute);
        LiveTransport { cfg, key, agent, limiter }
    }

    fn url(&self) -> String {
        format!("{}/models/{}:generateContent", self.cfg.endpoint.trim_end_matches('/'), self.cfg.model)
    }

    fn attempt(&self, body: &str) -> Result<String, Attempt> {
        self.limiter.acquire();
        let result = self
            .agent
            .post(&self.url())
            .header("x-goog-api-key", &self.key)
            .header("content-type", "application/json")
            .send(body);
        let mut response = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Attempt::Retry(TransportError::Timeout)),
            Err(e) => return Err(Attempt::Retry(TransportError::Other(e.to_string()))),
        };
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(TransportError::Status(status)));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(TransportError::Status(status)));
        }
        let text = response.body_mut().read_to_string().map_err(|e| Attempt::Retry(TransportError::Other(e.to_string())))?;
        response_text(&text).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Retry(TransportError),
    Fatal(TransportError),
}

/// Concatenated text parts of the first candidate.
fn response_text(body: &str) -> Result<String, TransportError> {
    let v: Value = serde_json::from_str(body).map_err(|e| TransportError::Other(format!("response is not JSON: {e}")))?;
    let parts = v
        .pointer("/candidates/0/content/parts")
        .and_then(Value::as_array)
        .ok_or_else(|| TransportError::Other("response has no candidate content".into()))?;
    Ok(parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect())
}

impl RefineTransport for LiveTransport {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let body = json!({
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
            "generationConfig": {"temperature": self.cfg.temperature},
        })
        .to_string();
        let attempts = self.cfg.attempts.max(1);
        let mut backoff = Duration::from_millis(self.cfg.initial_backoff_ms);
        let mut last = None;
        for n in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => last = Some(e),
            }
            if n < attempts {
                thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(TransportError::RetriesExhausted { attempts, last: last.map(|e| e.to_string()).unwrap_or_default() })
    }
}

/// `live` or `replay:<path>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransportSpec {
    Live,
    Replay(PathBuf),
}

impl FromStr for TransportSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "live" => Ok(TransportSpec::Live),
            Some(("replay", path)) if !path.is_empty() => Ok(TransportSpec::Replay(PathBuf::from(path))),
            _ => Err(format!("unknown transport {s:?} (expected live or replay:<path>)")),
        }
    }
}

impl fmt::Display for TransportSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportSpec::Live => f.write_str("live"),
            TransportSpec::Replay(p) => write!(f, "replay:{}", p.display()),
        }
    }
}

impl Serialize for TransportSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransportSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl TransportSpec {
    /// Resolves a relative replay path against `base`.
    pub fn resolve(&self, base: &Path) -> TransportSpec {
        match self {
            TransportSpec::Replay(p) if p.is_relative() => TransportSpec::Replay(base.join(p)),
            other => other.clone(),
        }
    }

    pub fn open(&self, live: &LiveConfig) -> Result<Box<dyn RefineTransport + Sync>, String> {
        match self {
            TransportSpec::Live => Ok(Box::new(LiveTransport::from_env(live.clone()).map_err(|e| e.to_string())?)),
            TransportSpec::Replay(path) => Ok(Box::new(ReplayTransport::read(path).map_err(|e| e.to_string())?)),
        }
    }
}
