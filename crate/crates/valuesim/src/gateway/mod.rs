//! Provider-agnostic access to completion and embedding services, with
//! deterministic caching on top.
//!
//! The [`Gateway`] owns the policy layer: zero-temperature enforcement,
//! content-addressed response caching, per-key single-flight so concurrent
//! identical requests trigger one provider call, and bounded retries with
//! exponential backoff for transport failures.

pub mod cache;
pub mod live;
pub mod mock;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use cache::Cache;

/// One completion request; the cache key covers every field.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl CompletionRequest {
    pub fn new(model: &str, prompt: String) -> CompletionRequest {
        CompletionRequest {
            model: model.to_string(),
            prompt,
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

/// Anything that can serve completions (live provider, scripted mock).
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

/// Anything that can serve embeddings.
pub trait EmbedBackend: Send + Sync {
    fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>>;
}

/// Gateway policy knobs.
#[derive(Debug, Clone)]
pub struct GatewayOptions {
    /// Reject requests with non-zero temperature (the default): simulated
    /// answers must be reproducible.
    pub allow_nonzero_temperature: bool,
    /// Retries after the first attempt for transport failures.
    pub max_retries: u32,
    /// Base backoff delay, doubled on each retry.
    pub retry_backoff: Duration,
}

impl Default for GatewayOptions {
    fn default() -> GatewayOptions {
        GatewayOptions {
            allow_nonzero_temperature: false,
            max_retries: 3,
            retry_backoff: Duration::from_millis(250),
        }
    }
}

/// Counters for cache effectiveness and provider traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub completion_requests: u64,
    pub completion_cache_hits: u64,
    pub embedding_requests: u64,
    pub embedding_cache_hits: u64,
    pub provider_calls: u64,
    pub retries: u64,
}

impl GatewayStats {
    pub fn completion_hit_rate(&self) -> Option<f64> {
        (self.completion_requests > 0)
            .then(|| self.completion_cache_hits as f64 / self.completion_requests as f64)
    }
}

#[derive(Serialize, Deserialize)]
struct CompletionEntry {
    kind: String,
    model: String,
    prompt: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingEntry {
    kind: String,
    model: String,
    text: String,
    vector: Vec<f64>,
}

/// Digest identifying a completion request.
pub fn completion_cache_key(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"completion");
    hasher.update([0]);
    hasher.update(request.model.as_bytes());
    hasher.update([0]);
    hasher.update(request.temperature.to_bits().to_le_bytes());
    hasher.update([0]);
    match request.max_tokens {
        Some(n) => hasher.update(u64::from(n).to_le_bytes()),
        None => hasher.update(b"none"),
    }
    hasher.update([0]);
    hasher.update(request.prompt.as_bytes());
    hex::encode(hasher.finalize())
}

/// Digest identifying an embedding request.
pub fn embedding_cache_key(model: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"embedding");
    hasher.update([0]);
    hasher.update(model.as_bytes());
    hasher.update([0]);
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// The shared entry point for all provider traffic.
pub struct Gateway {
    chat: Arc<dyn ChatBackend>,
    embed: Arc<dyn EmbedBackend>,
    cache: Option<Cache>,
    options: GatewayOptions,
    stats: Mutex<GatewayStats>,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn new(
        chat: Arc<dyn ChatBackend>,
        embed: Arc<dyn EmbedBackend>,
        cache: Option<Cache>,
        options: GatewayOptions,
    ) -> Gateway {
        Gateway {
            chat,
            embed,
            cache,
            options,
            stats: Mutex::new(GatewayStats::default()),
            inflight: Mutex::new(HashMap::new()),
        }
    }

    pub fn stats(&self) -> GatewayStats {
        *self.stats.lock().unwrap()
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        let mut map = self.inflight.lock().unwrap();
        map.entry(key.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(())))
            .clone()
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0u32;
        loop {
            {
                self.stats.lock().unwrap().provider_calls += 1;
            }
            match call() {
                Ok(value) => return Ok(value),
                Err(Error::Transport(msg)) if attempt < self.options.max_retries => {
                    attempt += 1;
                    self.stats.lock().unwrap().retries += 1;
                    log::warn!("transport failure (attempt {attempt}): {msg}; retrying");
                    std::thread::sleep(self.options.retry_backoff * 2u32.pow(attempt - 1));
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Serve a completion, from cache when possible.
    pub fn complete(&self, request: &CompletionRequest) -> Result<String> {
        if request.temperature != 0.0 && !self.options.allow_nonzero_temperature {
            return Err(Error::Config(format!(
                "temperature {} requested but deterministic mode requires 0; \
                 set allow_nonzero_temperature to override",
                request.temperature
            )));
        }
        let key = completion_cache_key(request);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().unwrap();

        self.stats.lock().unwrap().completion_requests += 1;
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get::<CompletionEntry>(&key)? {
                self.stats.lock().unwrap().completion_cache_hits += 1;
                return Ok(entry.text);
            }
        }
        let text = self.with_retries(|| self.chat.complete(request))?;
        if let Some(cache) = &self.cache {
            cache.put(
                &key,
                &CompletionEntry {
                    kind: "completion".to_string(),
                    model: request.model.clone(),
                    prompt: request.prompt.clone(),
                    text: text.clone(),
                },
            )?;
        }
        Ok(text)
    }

    /// Serve an embedding, from cache when possible.
    pub fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>> {
        let key = embedding_cache_key(model, text);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().unwrap();

        self.stats.lock().unwrap().embedding_requests += 1;
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get::<EmbeddingEntry>(&key)? {
                self.stats.lock().unwrap().embedding_cache_hits += 1;
                return Ok(entry.vector);
            }
        }
        let vector = self.with_retries(|| self.embed.embed(model, text))?;
        if let Some(cache) = &self.cache {
            cache.put(
                &key,
                &EmbeddingEntry {
                    kind: "embedding".to_string(),
                    model: model.to_string(),
                    text: text.to_string(),
                    vector: vector.clone(),
                },
            )?;
        }
        Ok(vector)
    }
}
