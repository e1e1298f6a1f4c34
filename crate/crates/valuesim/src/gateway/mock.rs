//! Scripted offline backends for tests and dry runs.
//!
//! The mock chat backend answers from an ordered rule list (first match
//! wins) and falls back to a fixed parseable reply, so pipelines always
//! complete. It records every prompt it sees, which lets tests assert on
//! call counts and prompt structure.

use std::path::Path;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gateway::{ChatBackend, CompletionRequest, EmbedBackend};

/// Reply issued when no rule matches, shaped so verdict parsing succeeds.
pub const MOCK_FALLBACK: &str = "Answer: 1\nAnalysis: mock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Prefix,
    Regex,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MockRule {
    pub on: MatchKind,
    pub pattern: String,
    pub response: String,
}

/// A scripted response table, deserialized from JSON: `{"rules": [...]}`.
#[derive(Debug, Clone, Deserialize, Default)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
}

enum CompiledMatcher {
    Exact(String),
    Prefix(String),
    Regex(Regex),
}

struct CompiledRule {
    matcher: CompiledMatcher,
    response: String,
}

impl CompiledRule {
    fn matches(&self, prompt: &str) -> bool {
        match &self.matcher {
            CompiledMatcher::Exact(p) => prompt == p,
            CompiledMatcher::Prefix(p) => prompt.starts_with(p),
            CompiledMatcher::Regex(re) => re.is_match(prompt),
        }
    }
}

/// Deterministic scripted chat backend.
pub struct MockChat {
    rules: Vec<CompiledRule>,
    prompts: Mutex<Vec<String>>,
}

impl MockChat {
    pub fn from_script(script: MockScript) -> Result<MockChat> {
        let mut rules = Vec::with_capacity(script.rules.len());
        for rule in script.rules {
            let matcher = match rule.on {
                MatchKind::Exact => CompiledMatcher::Exact(rule.pattern),
                MatchKind::Prefix => CompiledMatcher::Prefix(rule.pattern),
                MatchKind::Regex => CompiledMatcher::Regex(Regex::new(&rule.pattern).map_err(
                    |e| Error::Config(format!("invalid mock rule pattern: {e}")),
                )?),
            };
            rules.push(CompiledRule {
                matcher,
                response: rule.response,
            });
        }
        Ok(MockChat {
            rules,
            prompts: Mutex::new(Vec::new()),
        })
    }

    pub fn from_file(path: &Path) -> Result<MockChat> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read mock script {}: {e}", path.display()))
        })?;
        let script: MockScript = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid mock script {}: {e}", path.display())))?;
        MockChat::from_script(script)
    }

    /// A backend with no rules; every prompt gets [`MOCK_FALLBACK`].
    pub fn unscripted() -> MockChat {
        MockChat::from_script(MockScript::default()).expect("empty script compiles")
    }

    /// Number of completions served so far.
    pub fn call_count(&self) -> usize {
        self.prompts.lock().unwrap().len()
    }

    /// All prompts seen, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl ChatBackend for MockChat {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.prompts.lock().unwrap().push(request.prompt.clone());
        for rule in &self.rules {
            if rule.matches(&request.prompt) {
                return Ok(rule.response.clone());
            }
        }
        Ok(MOCK_FALLBACK.to_string())
    }
}

/// Hash-seeded embedding backend: the vector for a text is a fixed-dimension
/// unit vector derived deterministically from sha256(model, text).
pub struct MockEmbed {
    dimension: usize,
}

impl MockEmbed {
    pub const DEFAULT_DIMENSION: usize = 32;

    pub fn new(dimension: usize) -> MockEmbed {
        MockEmbed { dimension }
    }
}

impl Default for MockEmbed {
    fn default() -> MockEmbed {
        MockEmbed::new(MockEmbed::DEFAULT_DIMENSION)
    }
}

impl EmbedBackend for MockEmbed {
    fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>> {
        let mut hasher = Sha256::new();
        hasher.update(b"mock-embedding");
        hasher.update(model.as_bytes());
        hasher.update([0]);
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let seed = u64::from_le_bytes(digest[..8].try_into().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vector: Vec<f64> = (0..self.dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Provider("degenerate zero embedding".to_string()));
        }
        for x in &mut vector {
            *x /= norm;
        }
        Ok(vector)
    }
}
