use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use crate::cache::ResponseCache;
use crate::embed::{token_slot, tokenize};
use crate::error::{Error, Result};
use crate::http::HttpClient;
use crate::seed;

pub const ENV_API_BASE: &str = "PERSPECTRA_API_BASE";
pub const ENV_API_KEY: &str = "PERSPECTRA_API_KEY";
pub const ENV_MODEL: &str = "PERSPECTRA_MODEL";

/// Everything a backend may need to answer one annotation request.
#[derive(Debug, Clone, Copy)]
pub struct AnnotationRequest<'a> {
    pub persona_id: &'a str,
    pub instance_id: &'a str,
    pub instance_text: &'a str,
    pub prompt: &'a str,
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: usize,
}

pub trait Backend: Send + Sync {
    /// Stable identifier; part of every cache key.
    fn id(&self) -> String;

    /// The exact request body this backend would send.
    fn request_body(&self, req: &AnnotationRequest<'_>) -> Value;

    /// Send a request body, returning the raw response body.
    fn send(&self, body: &Value) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub backoff: Duration,
}

impl RetryPolicy {
    pub fn new(max_retries: usize, backoff: Duration) -> Self {
        Self { max_retries, backoff }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub cache_hit: bool,
}

/// `choices[0].message.content` of a chat-completions response.
pub fn extract_content(raw: &str) -> Result<String> {
    let body: Value = serde_json::from_str(raw).map_err(|e| Error::Backend(format!("response is not JSON: {e}")))?;
    body["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::Backend("response has no choices[0].message.content".into()))
}

/// Cache-first completion. On a miss the backend is called, transport
/// errors are retried with exponential backoff up to `policy.max_retries`
/// times, and the raw response is stored before returning.
pub fn request_annotation(
    backend: &dyn Backend,
    cache: Option<&ResponseCache>,
    req: &AnnotationRequest<'_>,
    policy: RetryPolicy,
) -> Result<Completion> {
    let body = backend.request_body(req);
    let backend_id = backend.id();
    let key = ResponseCache::key(&backend_id, &body);
    if let Some(cache) = cache {
        if let Some(raw) = cache.get(&key)? {
            return Ok(Completion { text: extract_content(&raw)?, cache_hit: true });
        }
    }
    let mut retries = 0;
    loop {
        match backend.send(&body) {
            Ok(raw) => {
                let text = extract_content(&raw)?;
                if let Some(cache) = cache {
                    cache.put(&key, &backend_id, &body, &raw)?;
                }
                return Ok(Completion { text, cache_hit: false });
            }
            Err(e) if e.is_retryable() && retries < policy.max_retries => {
                retries += 1;
                if !policy.backoff.is_zero() {
                    std::thread::sleep(policy.backoff * (1 << (retries - 1).min(6)));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// OpenAI-compatible `POST /v1/chat/completions` backend.
pub struct OpenAiBackend {
    client: HttpClient,
    model: String,
}

impl OpenAiBackend {
    pub fn new(client: HttpClient, model: impl Into<String>) -> Self {
        Self { client, model: model.into() }
    }

    /// Build from `PERSPECTRA_API_BASE`, `PERSPECTRA_API_KEY` and
    /// `PERSPECTRA_MODEL`. Environment values override `base`/`model`.
    pub fn from_env(base: Option<&str>, model: Option<&str>, timeout: Duration) -> Result<Self> {
        let base = std::env::var(ENV_API_BASE)
            .ok()
            .or_else(|| base.map(str::to_string))
            .ok_or_else(|| Error::config("backend.api_base", format!("set {ENV_API_BASE} or backend.api_base")))?;
        let model = std::env::var(ENV_MODEL)
            .ok()
            .or_else(|| model.map(str::to_string))
            .ok_or_else(|| Error::config("backend.model", format!("set {ENV_MODEL} or backend.model")))?;
        let key = std::env::var(ENV_API_KEY).ok();
        Ok(Self::new(HttpClient::new(base, key, timeout), model))
    }
}

impl Backend for OpenAiBackend {
    fn id(&self) -> String {
        format!("openai:{}:{}", self.client.base(), self.model)
    }

    fn request_body(&self, req: &AnnotationRequest<'_>) -> Value {
        json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": req.prompt }],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "seed": req.seed,
        })
    }

    fn send(&self, body: &Value) -> Result<String> {
        self.client.post_json("/v1/chat/completions", body)
    }
}

/// Deterministic stand-in for an LLM.
///
/// Each persona scores a text as `logistic(gain · w_p · φ(text))`, where φ
/// is the signed hashing embedding and `w_p` mixes a direction shared by
/// all personas with a persona-specific one. The label is 1 iff
/// `score + T·η > 0.5`, with η ∈ [-1, 1) hashed from
/// `(persona_id, text, seed)`, so agreement falls as temperature rises.
#[derive(Debug)]
pub struct MockBackend {
    dim: usize,
    embed_seed: u64,
    base_seed: u64,
    persona_spread: f64,
    gain: f64,
    failure_rate: f64,
    persona_seeds: BTreeMap<String, u64>,
    calls: AtomicUsize,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self {
            dim: crate::embed::DEFAULT_DIM,
            embed_seed: 0,
            base_seed: 0,
            persona_spread: 0.25,
            gain: 4.0,
            failure_rate: 0.0,
            persona_seeds: BTreeMap::new(),
            calls: AtomicUsize::new(0),
        }
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim.max(1);
        self
    }

    /// Seed of the shared scoring direction.
    pub fn with_base_seed(mut self, seed_value: u64) -> Self {
        self.base_seed = seed_value;
        self
    }

    /// Weight of the persona-specific direction relative to the shared one.
    pub fn with_persona_spread(mut self, spread: f64) -> Self {
        self.persona_spread = spread;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    /// Fraction of responses that are refusals instead of labels.
    pub fn with_failure_rate(mut self, rate: f64) -> Self {
        self.failure_rate = rate.clamp(0.0, 1.0);
        self
    }

    /// Override the weight seed of a persona (default: hash of its id).
    pub fn with_persona_seed(mut self, persona_id: &str, seed_value: u64) -> Self {
        self.persona_seeds.insert(persona_id.to_string(), seed_value);
        self
    }

    pub fn with_persona_seeds(mut self, seeds: HashMap<String, u64>) -> Self {
        self.persona_seeds.extend(seeds);
        self
    }

    pub fn persona_spread(&self) -> f64 {
        self.persona_spread
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Number of `send` calls served.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn persona_seed(&self, persona_id: &str) -> u64 {
        self.persona_seeds
            .get(persona_id)
            .copied()
            .unwrap_or_else(|| seed::hash_parts(0x7065_7273_6f6e_61, &[persona_id]))
    }

    fn gaussian(seed_value: u64, index: usize) -> f64 {
        let h = seed::hash_bytes(seed_value, &(index as u64).to_le_bytes());
        let u1 = seed::unit_f64(h).max(f64::MIN_POSITIVE);
        let u2 = seed::unit_f64(seed::mix64(h));
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Pre-threshold persona score in (0, 1).
    pub fn score(&self, persona_id: &str, instance_text: &str) -> f64 {
        let persona_seed = self.persona_seed(persona_id);
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for token in tokenize(instance_text) {
            let (idx, sign) = token_slot(&token, self.dim, self.embed_seed);
            *counts.entry(idx).or_default() += sign;
        }
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.5;
        }
        let scale = 1.0 / (1.0 + self.persona_spread * self.persona_spread).sqrt();
        let dot: f64 = counts
            .iter()
            .map(|(&j, &v)| {
                let w = Self::gaussian(self.base_seed, j) + self.persona_spread * Self::gaussian(persona_seed, j);
                w * scale * v / norm
            })
            .sum();
        1.0 / (1.0 + (-self.gain * dot).exp())
    }

    /// Completion text for one request.
    pub fn complete(&self, persona_id: &str, instance_text: &str, temperature: f64, seed_value: u64) -> String {
        let fail = seed::unit_f64(seed::hash_parts(seed_value, &["refuse", persona_id, instance_text]));
        if fail < self.failure_rate {
            return "I cannot annotate this.".to_string();
        }
        let eta = 2.0 * seed::unit_f64(seed::hash_parts(seed_value, &["noise", persona_id, instance_text])) - 1.0;
        let label = u8::from(self.score(persona_id, instance_text) + temperature * eta > 0.5);
        format!("####Annotator:{label}")
    }
}

impl Backend for MockBackend {
    fn id(&self) -> String {
        let overrides = serde_json::to_string(&self.persona_seeds).expect("seed map serializes");
        format!(
            "mock:v1:dim={}:embed_seed={}:base_seed={}:spread={}:gain={}:fail={}:seeds={}",
            self.dim,
            self.embed_seed,
            self.base_seed,
            self.persona_spread,
            self.gain,
            self.failure_rate,
            crate::cache::sha256_hex(overrides.as_bytes())
        )
    }

    fn request_body(&self, req: &AnnotationRequest<'_>) -> Value {
        json!({
            "model": "mock",
            "messages": [{ "role": "user", "content": req.prompt }],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "seed": req.seed,
            "metadata": {
                "persona_id": req.persona_id,
                "instance_id": req.instance_id,
                "instance_text": req.instance_text,
            },
        })
    }

    fn send(&self, body: &Value) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let field = |v: &Value, name: &str| v.as_str().map(str::to_string).ok_or_else(|| Error::Backend(format!("mock request lacks {name}")));
        let persona = field(&body["metadata"]["persona_id"], "persona_id")?;
        let text = field(&body["metadata"]["instance_text"], "instance_text")?;
        let temperature = body["temperature"].as_f64().unwrap_or(0.0);
        let seed_value = body["seed"].as_u64().unwrap_or(0);
        let content = self.complete(&persona, &text, temperature, seed_value);
        Ok(json!({
            "object": "chat.completion",
            "model": "mock",
            "choices": [{ "index": 0, "message": { "role": "assistant", "content": content }, "finish_reason": "stop" }],
        })
        .to_string())
    }
}
