//! Embedding index and exact top-k cosine retrieval over profile entries.
//!
//! The similarity kernels are generic over the float width via `num-traits`;
//! the index itself stores [`crate::Scalar`] vectors. The scan is an exact
//! linear pass — per-respondent indices hold at most a few hundred entries,
//! and exactness keeps the brute-force oracle property trivial to state.

use std::path::Path;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::ordinal_index_of_id;
use crate::error::{Error, Result};
use crate::gateway::cache::Cache;
use crate::gateway::Gateway;
use crate::Scalar;

/// Dot product of two equal-length vectors.
pub fn dot<T: Float>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Index(format!(
            "vector dimensions differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y))
}

/// Euclidean norm.
pub fn norm<T: Float>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Cosine similarity in [-1, 1]. Zero vectors have no direction and are
/// rejected.
pub fn cosine<T: Float>(a: &[T], b: &[T]) -> Result<T> {
    let dot_ab = dot(a, b)?;
    let norm_a = norm(a);
    let norm_b = norm(b);
    if norm_a.is_zero() || norm_b.is_zero() {
        return Err(Error::UndefinedSimilarity(
            "cosine of a zero vector is undefined".to_string(),
        ));
    }
    Ok(dot_ab / (norm_a * norm_b))
}

/// One indexed profile entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// Question id of the profile entry.
    pub entry_id: String,
    pub vector: Vec<Scalar>,
    /// The serialized entry text the vector was computed from.
    pub payload: String,
}

/// A similarity match from [`VectorIndex::top_k`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub entry_id: String,
    pub similarity: Scalar,
}

/// An immutable embedding index over one respondent's profile entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    entries: Vec<IndexEntry>,
    dimension: usize,
}

impl VectorIndex {
    /// Assemble an index from already-embedded entries.
    pub fn from_entries(entries: Vec<IndexEntry>) -> Result<VectorIndex> {
        if entries.is_empty() {
            return Err(Error::Index("cannot build an empty index".to_string()));
        }
        let dimension = entries[0].vector.len();
        let mut seen = std::collections::BTreeSet::new();
        for entry in &entries {
            if entry.vector.len() != dimension {
                return Err(Error::Index(format!(
                    "entry '{}' has dimension {}, expected {dimension}",
                    entry.entry_id,
                    entry.vector.len()
                )));
            }
            if entry.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Index(format!(
                    "entry '{}' has a non-finite component",
                    entry.entry_id
                )));
            }
            // The tie-break rule needs a parsable ordinal index.
            ordinal_index_of_id(&entry.entry_id)?;
            if !seen.insert(entry.entry_id.clone()) {
                return Err(Error::Index(format!(
                    "duplicate entry id '{}'",
                    entry.entry_id
                )));
            }
        }
        Ok(VectorIndex { entries, dimension })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn payload_of(&self, entry_id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.entry_id == entry_id)
            .map(|e| e.payload.as_str())
    }

    /// Exact top-k by cosine similarity, descending; ties broken by
    /// ascending ordinal index of the entry id. Returns min(k, len) matches.
    pub fn top_k(&self, query: &[Scalar], k: usize) -> Result<Vec<Match>> {
        if k == 0 {
            return Err(Error::Config("top_k requires k >= 1".to_string()));
        }
        let mut scored: Vec<(Scalar, u32, &IndexEntry)> = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let similarity = cosine(query, &entry.vector)?;
            let ordinal = ordinal_index_of_id(&entry.entry_id)?;
            scored.push((similarity, ordinal, entry));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(similarity, _, entry)| Match {
                entry_id: entry.entry_id.clone(),
                similarity,
            })
            .collect())
    }
}

/// Digest identifying an index build: the embedding model plus every
/// (entry_id, payload) pair in order.
pub fn index_digest(embedding_model: &str, entries: &[(String, String)]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"vector-index");
    hasher.update([0]);
    hasher.update(embedding_model.as_bytes());
    for (id, payload) in entries {
        hasher.update([0]);
        hasher.update(id.as_bytes());
        hasher.update([0]);
        hasher.update(payload.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Embed every (entry_id, payload) pair through the gateway and build an
/// index over the results.
pub fn build_index(
    gateway: &Gateway,
    embedding_model: &str,
    entries: &[(String, String)],
) -> Result<VectorIndex> {
    if entries.is_empty() {
        return Err(Error::Index("cannot build an empty index".to_string()));
    }
    let mut indexed = Vec::with_capacity(entries.len());
    for (entry_id, payload) in entries {
        let vector = gateway.embed(embedding_model, payload)?;
        indexed.push(IndexEntry {
            entry_id: entry_id.clone(),
            vector,
            payload: payload.clone(),
        });
    }
    VectorIndex::from_entries(indexed)
}

/// Like [`build_index`], but memoized on disk keyed by the content digest of
/// (model, entries), so repeated runs skip even the embedding cache lookups.
pub fn build_index_cached(
    gateway: &Gateway,
    embedding_model: &str,
    entries: &[(String, String)],
    index_dir: Option<&Path>,
) -> Result<VectorIndex> {
    let Some(dir) = index_dir else {
        return build_index(gateway, embedding_model, entries);
    };
    let cache = Cache::open(dir)?;
    let key = index_digest(embedding_model, entries);
    if let Some(index) = cache.get::<VectorIndex>(&key)? {
        return Ok(index);
    }
    let index = build_index(gateway, embedding_model, entries)?;
    cache.put(&key, &index)?;
    Ok(index)
}
