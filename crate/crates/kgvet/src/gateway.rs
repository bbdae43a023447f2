//! Access to language-model providers: a provider-agnostic trait, an HTTP
//! client for OpenAI-style endpoints with retry and backoff, and a scripted
//! mock whose replies are keyed by prompt fingerprint. Every call is
//! recorded in a transcript that can be dumped as JSONL.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use kgvet_core::embed::{fnv1a_64_hex, HashEmbedder};
use serde::{Deserialize, Serialize};

/// How often and how patiently to retry transient failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts, counting the first one. Must be at least 1.
    pub attempts: u32,
    /// Delay before the second attempt; doubles for each later one.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff_base_ms: 250,
        }
    }
}

/// Connection settings for a completion/embedding provider. The API key is
/// never stored here: `api_key_env` names the environment variable to read
/// at call time, keeping credentials out of config files and artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    /// Upper bound on concurrent in-flight requests through one handle.
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "http://localhost:8000/v1".to_string(),
            model: "local-model".to_string(),
            api_key_env: "KGVET_API_KEY".to_string(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.endpoint.is_empty() {
            return Err(GatewayError::BadConfig("endpoint is empty".into()));
        }
        if self.timeout_secs == 0 {
            return Err(GatewayError::BadConfig("timeout must be positive".into()));
        }
        if self.retry.attempts == 0 {
            return Err(GatewayError::BadConfig(
                "retry attempts must be at least 1".into(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::BadConfig(
                "max_in_flight must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid provider config: {0}")]
    BadConfig(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("server error: {0}")]
    Server(String),
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("retries exhausted after {attempts} attempts; last error: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed provider reply: {0}")]
    Protocol(String),
    #[error("no scripted reply for template '{template}' with fingerprint {fingerprint}")]
    ScriptMiss {
        template: String,
        fingerprint: String,
    },
    #[error("api key variable '{0}' is not set")]
    MissingKey(String),
}

impl GatewayError {
    /// Transient failures are worth retrying; everything else fails fast.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            GatewayError::RateLimited(_)
                | GatewayError::Server(_)
                | GatewayError::Timeout(_)
                | GatewayError::Transport(_)
        )
    }
}

/// One completed (or failed) logical call, after retries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub template: String,
    /// FNV-1a hash of the rendered prompt, hex. Stable across runs.
    pub fingerprint: String,
    pub attempts: u32,
    pub reply: Option<String>,
    pub error: Option<String>,
}

/// Provider-agnostic surface the agent and harness talk to. Handles are
/// shared across worker threads, so implementations synchronize internally.
pub trait Gateway: Send + Sync {
    /// Send a rendered prompt and return the model's text reply. `template`
    /// names which prompt family produced it, for scripting and transcripts.
    fn complete(&self, template: &str, prompt: &str) -> Result<String, GatewayError>;

    /// Embed each text into a vector; all vectors share one dimension.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;

    /// Everything this handle has been asked so far, in call order.
    fn transcript(&self) -> Vec<TranscriptEntry>;
}

/// Compute the fingerprint under which a rendered prompt is scripted.
pub fn prompt_fingerprint(prompt: &str) -> String {
    fnv1a_64_hex(prompt.as_bytes())
}

/// Write transcript entries as JSONL.
pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn push_entry(
    log: &Mutex<Vec<TranscriptEntry>>,
    template: &str,
    fingerprint: String,
    attempts: u32,
    outcome: &Result<String, GatewayError>,
) {
    let entry = TranscriptEntry {
        template: template.to_string(),
        fingerprint,
        attempts,
        reply: outcome.as_ref().ok().cloned(),
        error: outcome.as_ref().err().map(|e| e.to_string()),
    };
    log.lock().expect("transcript lock").push(entry);
}

// ---------------------------------------------------------------------------
// Retry driver

/// Injectable delay, so tests can observe backoff instead of waiting it out.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

/// Actually sleeps.
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Collects requested delays instead of sleeping.
#[derive(Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().expect("sleeper lock").clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, duration: Duration) {
        self.delays.lock().expect("sleeper lock").push(duration);
    }
}

/// Run `attempt` up to `policy.attempts` times, sleeping between transient
/// failures with doubling delays. Returns the first success, the first
/// permanent error, or an exhaustion error wrapping the last transient one.
/// Also reports how many attempts were actually made.
pub(crate) fn with_retries<T>(
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    mut attempt: impl FnMut() -> Result<T, GatewayError>,
) -> (u32, Result<T, GatewayError>) {
    let mut last: Option<GatewayError> = None;
    for n in 1..=policy.attempts {
        match attempt() {
            Ok(value) => return (n, Ok(value)),
            Err(e) if !e.is_transient() => return (n, Err(e)),
            Err(e) => {
                if n < policy.attempts {
                    let delay = policy.backoff_base_ms.saturating_mul(1 << (n - 1));
                    sleeper.sleep(Duration::from_millis(delay));
                }
                last = Some(e);
            }
        }
    }
    let last = last.expect("at least one attempt");
    (
        policy.attempts,
        Err(GatewayError::Exhausted {
            attempts: policy.attempts,
            last: last.to_string(),
        }),
    )
}

// ---------------------------------------------------------------------------
// Scripted mock

/// Canned replies keyed by (template name, prompt fingerprint). A key may
/// hold several replies: they are consumed in order and the last one then
/// repeats, so a retried call can be scripted to change its answer while
/// steady-state calls stay deterministic.
#[derive(Debug, Default, Clone)]
pub struct MockScript {
    replies: BTreeMap<(String, String), VecDeque<String>>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Script a reply for a prompt given in full; the fingerprint is
    /// computed here so tests never hash by hand.
    pub fn insert(&mut self, template: &str, prompt: &str, reply: &str) -> &mut Self {
        self.replies
            .entry((template.to_string(), prompt_fingerprint(prompt)))
            .or_default()
            .push_back(reply.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }

    fn take(&mut self, template: &str, fingerprint: &str) -> Option<String> {
        let queue = self
            .replies
            .get_mut(&(template.to_string(), fingerprint.to_string()))?;
        if queue.len() > 1 {
            queue.pop_front()
        } else {
            queue.front().cloned()
        }
    }
}

/// One scripted reply as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub template: String,
    pub fingerprint: String,
    pub reply: String,
}

impl MockScript {
    /// Script a reply under a precomputed fingerprint.
    pub fn insert_fingerprint(
        &mut self,
        template: &str,
        fingerprint: &str,
        reply: &str,
    ) -> &mut Self {
        self.replies
            .entry((template.to_string(), fingerprint.to_string()))
            .or_default()
            .push_back(reply.to_string());
        self
    }

    /// Flatten to storable entries; queued replies keep their order.
    pub fn entries(&self) -> Vec<ScriptEntry> {
        let mut out = Vec::new();
        for ((template, fingerprint), queue) in &self.replies {
            for reply in queue {
                out.push(ScriptEntry {
                    template: template.clone(),
                    fingerprint: fingerprint.clone(),
                    reply: reply.clone(),
                });
            }
        }
        out
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut script = MockScript::new();
        for e in entries {
            script.insert_fingerprint(&e.template, &e.fingerprint, &e.reply);
        }
        script
    }

    /// Read a script file: a JSON array of `{template, fingerprint, reply}`.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(&text).map_err(std::io::Error::other)?;
        Ok(Self::from_entries(entries))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.entries()).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }
}

/// Deterministic gateway for tests and offline runs: completions come from
/// a script, embeddings from the hash embedder. An unscripted prompt is a
/// hard error, never a silent default.
pub struct MockGateway {
    script: Mutex<MockScript>,
    embedder: HashEmbedder,
    log: Mutex<Vec<TranscriptEntry>>,
}

impl MockGateway {
    pub fn new(script: MockScript) -> Self {
        MockGateway {
            script: Mutex::new(script),
            embedder: HashEmbedder::default(),
            log: Mutex::new(Vec::new()),
        }
    }
}

impl Gateway for MockGateway {
    fn complete(&self, template: &str, prompt: &str) -> Result<String, GatewayError> {
        let fingerprint = prompt_fingerprint(prompt);
        let reply = self
            .script
            .lock()
            .expect("script lock")
            .take(template, &fingerprint);
        let outcome = reply.ok_or_else(|| GatewayError::ScriptMiss {
            template: template.to_string(),
            fingerprint: fingerprint.clone(),
        });
        push_entry(&self.log, template, fingerprint, 1, &outcome);
        outcome
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::BadConfig("nothing to embed".into()));
        }
        Ok(self.embedder.embed_batch(texts))
    }

    fn transcript(&self) -> Vec<TranscriptEntry> {
        self.log.lock().expect("transcript lock").clone()
    }
}

// ---------------------------------------------------------------------------
// HTTP gateway

/// The wire layer under `HttpGateway`, separated so retry/backoff/accounting
/// logic is testable without a server.
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<serde_json::Value, GatewayError>;
}

/// Blocking reqwest-backed transport speaking JSON over HTTPS.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<serde_json::Value, GatewayError> {
        let mut request = self.client.post(url).timeout(timeout).json(body);
        if !api_key.is_empty() {
            request = request.bearer_auth(api_key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout(timeout.as_millis() as u64)
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {
                serde_json::from_str(&text).map_err(|e| GatewayError::Protocol(e.to_string()))
            }
            401 | 403 => Err(GatewayError::Auth(format!("http {status}"))),
            429 => Err(GatewayError::RateLimited(format!("http {status}"))),
            500..=599 => Err(GatewayError::Server(format!("http {status}"))),
            _ => Err(GatewayError::Protocol(format!("unexpected http {status}"))),
        }
    }
}

/// Counting semaphore bounding concurrent requests per handle.
struct InFlightGate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl InFlightGate {
    fn new(limit: usize) -> Self {
        InFlightGate {
            slots: Mutex::new(limit),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut slots = self.slots.lock().expect("gate lock");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("gate wait");
        }
        *slots -= 1;
    }

    fn release(&self) {
        *self.slots.lock().expect("gate lock") += 1;
        self.freed.notify_one();
    }
}

/// Gateway speaking the OpenAI-style `/chat/completions` and `/embeddings`
/// protocol, with bounded concurrency and transparent retries.
pub struct HttpGateway {
    config: ProviderConfig,
    transport: Box<dyn HttpTransport>,
    sleeper: Box<dyn Sleeper>,
    gate: InFlightGate,
    log: Mutex<Vec<TranscriptEntry>>,
}

impl HttpGateway {
    pub fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        let transport = Box::new(ReqwestTransport::new()?);
        Self::with_parts(config, transport, Box::new(ThreadSleeper))
    }

    /// Assemble from explicit parts; tests inject fake transports/sleepers.
    pub fn with_parts(
        config: ProviderConfig,
        transport: Box<dyn HttpTransport>,
        sleeper: Box<dyn Sleeper>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let gate = InFlightGate::new(config.max_in_flight);
        Ok(HttpGateway {
            config,
            transport,
            sleeper,
            gate,
            log: Mutex::new(Vec::new()),
        })
    }

    fn api_key(&self) -> Result<String, GatewayError> {
        if self.config.api_key_env.is_empty() {
            return Ok(String::new());
        }
        match std::env::var(&self.config.api_key_env) {
            Ok(key) => Ok(key),
            // Unset is tolerated for keyless local endpoints; requests are
            // simply sent without credentials.
            Err(std::env::VarError::NotPresent) => Ok(String::new()),
            Err(e) => Err(GatewayError::MissingKey(format!(
                "{}: {e}",
                self.config.api_key_env
            ))),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.config.endpoint.trim_end_matches('/'))
    }

    fn post_with_retries(
        &self,
        url: &str,
        body: &serde_json::Value,
    ) -> (u32, Result<serde_json::Value, GatewayError>) {
        let key = match self.api_key() {
            Ok(k) => k,
            Err(e) => return (0, Err(e)),
        };
        let timeout = Duration::from_secs(self.config.timeout_secs);
        with_retries(&self.config.retry, self.sleeper.as_ref(), || {
            self.gate.acquire();
            let result = self.transport.post_json(url, &key, body, timeout);
            self.gate.release();
            result
        })
    }
}

impl Gateway for HttpGateway {
    fn complete(&self, template: &str, prompt: &str) -> Result<String, GatewayError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let (attempts, outcome) = self.post_with_retries(&self.url("chat/completions"), &body);
        let outcome = outcome.and_then(|v| {
            v.pointer("/choices/0/message/content")
                .and_then(|c| c.as_str())
                .map(str::to_string)
                .ok_or_else(|| GatewayError::Protocol("reply carries no message content".into()))
        });
        push_entry(
            &self.log,
            template,
            prompt_fingerprint(prompt),
            attempts,
            &outcome,
        );
        outcome
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::BadConfig("nothing to embed".into()));
        }
        let body = serde_json::json!({
            "model": self.config.model,
            "input": texts,
        });
        let (attempts, outcome) = self.post_with_retries(&self.url("embeddings"), &body);
        let outcome = outcome.and_then(|v| {
            let data = v
                .get("data")
                .and_then(|d| d.as_array())
                .ok_or_else(|| GatewayError::Protocol("reply carries no data array".into()))?;
            let mut vectors = Vec::with_capacity(data.len());
            for item in data {
                let raw = item
                    .get("embedding")
                    .and_then(|e| e.as_array())
                    .ok_or_else(|| GatewayError::Protocol("row carries no embedding".into()))?;
                let vector: Option<Vec<f64>> = raw.iter().map(|x| x.as_f64()).collect();
                vectors.push(
                    vector.ok_or_else(|| GatewayError::Protocol("non-numeric embedding".into()))?,
                );
            }
            if vectors.len() != texts.len() {
                return Err(GatewayError::Protocol(format!(
                    "asked for {} embeddings, got {}",
                    texts.len(),
                    vectors.len()
                )));
            }
            let dim = vectors.first().map(Vec::len).unwrap_or(0);
            if vectors.iter().any(|v| v.len() != dim) {
                return Err(GatewayError::Protocol("ragged embedding dimensions".into()));
            }
            Ok(vectors)
        });
        let fingerprint = prompt_fingerprint(&texts.join("\u{1f}"));
        match &outcome {
            Ok(vectors) => {
                let note = format!("{} vectors of dim {}", vectors.len(), vectors[0].len());
                push_entry(&self.log, "embed", fingerprint, attempts, &Ok(note));
            }
            Err(e) => {
                push_entry(&self.log, "embed", fingerprint, attempts, &Err(e.clone()));
            }
        }
        outcome
    }

    fn transcript(&self) -> Vec<TranscriptEntry> {
        self.log.lock().expect("transcript lock").clone()
    }
}
