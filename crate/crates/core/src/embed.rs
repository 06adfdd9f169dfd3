//! Text embedding providers.
//!
//! [`HashingEmbedder`] is a deterministic offline bag-of-tokens embedder;
//! [`RemoteEmbedder`] calls an OpenAI-compatible `/v1/embeddings` endpoint
//! and caches one vector per text.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cache::ResponseCache;
use crate::error::{Error, Result};
use crate::http::HttpClient;
use crate::seed;

pub const DEFAULT_DIM: usize = 256;
pub const MIN_HASHING_DIM: usize = 8;

/// Dense embedding. Vectors produced here are unit length, except the zero
/// vector for empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite values".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit length; the zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.iter_mut().for_each(|v| *v /= n);
        }
        self
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Cosine similarity; 0 when either vector is zero.
    pub fn cosine(&self, other: &Self) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

/// Identifies the embedding space a model was trained in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderDescriptor {
    Hashing { dim: usize, seed: u64 },
    Remote { base: String, model: String },
}

pub trait Embedder: Send + Sync {
    fn descriptor(&self) -> EmbedderDescriptor;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }
}

/// Lowercased tokens split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// `(index, sign)` of a token in a signed hashing space of size `dim`.
#[inline]
pub fn token_slot(token: &str, dim: usize, seed_value: u64) -> (usize, f64) {
    let h = seed::hash_bytes(seed_value, token.as_bytes());
    let sign = if seed::mix64(h ^ 0x5bd1_e995) >> 63 == 0 { 1.0 } else { -1.0 };
    ((h % dim as u64) as usize, sign)
}

/// Signed feature hashing: each token adds ±1 at a hashed index, then the
/// counts are L2-normalized. Empty text gives the zero vector.
pub fn embed_hashing(text: &str, dim: usize, seed_value: u64) -> EmbeddingVector {
    let mut values = vec![0.0; dim];
    for token in tokenize(text) {
        let (idx, sign) = token_slot(&token, dim, seed_value);
        values[idx] += sign;
    }
    EmbeddingVector(values).normalized()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < MIN_HASHING_DIM {
            return Err(Error::InvalidArgument(format!("hashing dim {dim} < {MIN_HASHING_DIM}")));
        }
        Ok(Self { dim, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM, seed: 0 }
    }
}

impl Embedder for HashingEmbedder {
    fn descriptor(&self) -> EmbedderDescriptor {
        EmbedderDescriptor::Hashing { dim: self.dim, seed: self.seed }
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| embed_hashing(t, self.dim, self.seed)).collect())
    }
}

/// Client for an OpenAI-compatible embeddings endpoint.
pub struct RemoteEmbedder {
    client: HttpClient,
    model: String,
    cache: Option<ResponseCache>,
    batch_size: usize,
    dim: Mutex<Option<usize>>,
    calls: AtomicUsize,
}

impl RemoteEmbedder {
    pub fn new(client: HttpClient, model: impl Into<String>, cache: Option<ResponseCache>) -> Self {
        Self { client, model: model.into(), cache, batch_size: 64, dim: Mutex::new(None), calls: AtomicUsize::new(0) }
    }

    pub fn with_timeout(base: &str, api_key: Option<String>, model: &str, cache: Option<ResponseCache>, timeout: Duration) -> Self {
        Self::new(HttpClient::new(base, api_key, timeout), model, cache)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    /// Number of HTTP requests issued so far.
    pub fn remote_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn backend_id(&self) -> String {
        format!("embeddings:{}", self.client.base())
    }

    fn text_request(&self, text: &str) -> Value {
        json!({ "model": self.model, "input": [text] })
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        let mut dim = self.dim.lock().expect("dim lock");
        match *dim {
            Some(expected) if expected != actual => Err(Error::DimensionMismatch { expected, actual }),
            Some(_) => Ok(()),
            None => {
                *dim = Some(actual);
                Ok(())
            }
        }
    }

    fn parse_vector(value: &Value) -> Result<Vec<f64>> {
        value
            .as_array()
            .ok_or_else(|| Error::Backend("embedding is not an array".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Error::Backend("embedding has a non-numeric value".into())))
            .collect()
    }

    fn fetch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let raw = self.client.post_json("/v1/embeddings", &json!({ "model": self.model, "input": texts }))?;
        let body: Value = serde_json::from_str(&raw).map_err(|e| Error::Backend(format!("bad embeddings response: {e}")))?;
        let data = body["data"].as_array().ok_or_else(|| Error::Backend("response has no `data` array".into()))?;
        if data.len() != texts.len() {
            return Err(Error::Backend(format!("{} embeddings for {} inputs", data.len(), texts.len())));
        }
        // Entries may arrive out of order; honor `index` when present.
        let mut out = vec![Vec::new(); texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let idx = item["index"].as_u64().map(|i| i as usize).unwrap_or(pos);
            if idx >= texts.len() {
                return Err(Error::Backend(format!("embedding index {idx} out of range")));
            }
            out[idx] = Self::parse_vector(&item["embedding"])?;
        }
        Ok(out)
    }
}

impl Embedder for RemoteEmbedder {
    fn descriptor(&self) -> EmbedderDescriptor {
        EmbedderDescriptor::Remote { base: self.client.base().to_string(), model: self.model.clone() }
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::InvalidArgument("no texts to embed".into()));
        }
        let backend = self.backend_id();
        let mut resolved: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut misses: Vec<&str> = Vec::new();
        for &text in texts {
            if resolved.contains_key(text) || misses.contains(&text) {
                continue;
            }
            let cached = match &self.cache {
                Some(cache) => cache.get(&ResponseCache::key(&backend, &self.text_request(text)))?,
                None => None,
            };
            match cached {
                Some(raw) => {
                    let body: Value = serde_json::from_str(&raw)?;
                    resolved.insert(text, Self::parse_vector(&body["data"][0]["embedding"])?);
                }
                None => misses.push(text),
            }
        }
        for chunk in misses.chunks(self.batch_size) {
            for (text, vector) in chunk.iter().zip(self.fetch(chunk)?) {
                self.check_dim(vector.len())?;
                if let Some(cache) = &self.cache {
                    let request = self.text_request(text);
                    let response = json!({ "data": [{ "index": 0, "embedding": vector }] }).to_string();
                    cache.put(&ResponseCache::key(&backend, &request), &backend, &request, &response)?;
                }
                resolved.insert(text, vector);
            }
        }
        texts
            .iter()
            .map(|t| {
                let v = resolved[t].clone();
                self.check_dim(v.len())?;
                Ok(EmbeddingVector::new(v)?.normalized())
            })
            .collect()
    }
}
