//! Text-to-embedding providers. Offline-first: embeddings normally come
//! from a cache file keyed by phrase hash; an HTTP encoder service is
//! optional and only needed to regenerate caches.

use std::collections::HashMap;

use ldfs_core::{normalize, FeatureCache, UnitVector};
use ndarray::Array1;
use sha2::{Digest, Sha256};

use crate::error::{Result, TextError};

/// Env var naming an optional HTTP text-encoder endpoint.
pub const TEXT_ENCODER_URL_ENV: &str = "LDFS_TEXT_ENCODER_URL";

/// Cache key for a phrase: hex SHA-256 of its UTF-8 bytes.
pub fn phrase_key(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub trait TextEncoder {
    fn encode(&self, text: &str) -> Result<UnitVector>;
    fn dim(&self) -> usize;
}

/// Looks phrases up in a feature cache whose instance ids are phrase keys.
pub struct CachedTextEncoder {
    dim: usize,
    by_key: HashMap<String, Array1<f64>>,
}

impl CachedTextEncoder {
    pub fn from_cache(cache: &FeatureCache) -> Self {
        let mut by_key = HashMap::new();
        for (i, id) in cache.features.instance_ids().iter().enumerate() {
            by_key.insert(id.clone(), cache.features.row(i).to_owned());
        }
        CachedTextEncoder {
            dim: cache.features.dim(),
            by_key,
        }
    }

    pub fn contains(&self, text: &str) -> bool {
        self.by_key.contains_key(&phrase_key(text))
    }

    /// Looks up a precomputed key directly (attribute-bank records carry
    /// keys rather than re-hashing).
    pub fn lookup_key(&self, key: &str) -> Option<UnitVector> {
        self.by_key
            .get(key)
            .map(|row| normalize(row.view()).expect("cached rows are nonzero"))
    }
}

impl TextEncoder for CachedTextEncoder {
    fn encode(&self, text: &str) -> Result<UnitVector> {
        let key = phrase_key(text);
        match self.by_key.get(&key) {
            Some(row) => Ok(normalize(row.view())?),
            None => Err(TextError::EncoderMiss {
                phrase: text.to_string(),
            }),
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Client for an external encoder service accepting `{"texts": [...]}` and
/// returning one d-dim float array per text.
pub struct HttpTextEncoder {
    url: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl HttpTextEncoder {
    pub fn new(url: String, dim: usize) -> Self {
        HttpTextEncoder {
            url,
            dim,
            client: reqwest::blocking::Client::new(),
        }
    }

    /// Builds a client from `LDFS_TEXT_ENCODER_URL` when set.
    pub fn from_env(dim: usize) -> Option<Self> {
        std::env::var(TEXT_ENCODER_URL_ENV)
            .ok()
            .filter(|url| !url.is_empty())
            .map(|url| Self::new(url, dim))
    }

    pub fn encode_batch(&self, texts: &[&str]) -> Result<Vec<UnitVector>> {
        let body = serde_json::json!({ "texts": texts });
        let resp = self
            .client
            .post(&self.url)
            .json(&body)
            .send()
            .map_err(|e| TextError::Service {
                reason: e.to_string(),
            })?;
        if !resp.status().is_success() {
            return Err(TextError::Service {
                reason: format!("status {}", resp.status()),
            });
        }
        let arrays: Vec<Vec<f64>> = resp.json().map_err(|e| TextError::Service {
            reason: e.to_string(),
        })?;
        if arrays.len() != texts.len() {
            return Err(TextError::Service {
                reason: format!("expected {} embeddings, got {}", texts.len(), arrays.len()),
            });
        }
        arrays
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(TextError::Service {
                        reason: format!("embedding dim {} != {}", v.len(), self.dim),
                    });
                }
                Ok(normalize(Array1::from_vec(v).view())?)
            })
            .collect()
    }
}

impl TextEncoder for HttpTextEncoder {
    fn encode(&self, text: &str) -> Result<UnitVector> {
        Ok(self.encode_batch(&[text])?.remove(0))
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Offline cache first, optional service fallback. A miss with no service
/// configured is an error naming the phrase.
pub struct DescriptionProvider {
    cache: Option<CachedTextEncoder>,
    service: Option<HttpTextEncoder>,
    dim: usize,
}

impl DescriptionProvider {
    pub fn new(cache: Option<CachedTextEncoder>, service: Option<HttpTextEncoder>) -> Self {
        let dim = cache
            .as_ref()
            .map(|c| c.dim())
            .or_else(|| service.as_ref().map(|s| s.dim()))
            .unwrap_or(0);
        DescriptionProvider { cache, service, dim }
    }

    pub fn offline(cache: CachedTextEncoder) -> Self {
        Self::new(Some(cache), None)
    }
}

impl TextEncoder for DescriptionProvider {
    fn encode(&self, text: &str) -> Result<UnitVector> {
        if let Some(cache) = &self.cache {
            match cache.encode(text) {
                Ok(v) => return Ok(v),
                Err(TextError::EncoderMiss { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if let Some(service) = &self.service {
            return service.encode(text);
        }
        Err(TextError::EncoderMiss {
            phrase: text.to_string(),
        })
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
