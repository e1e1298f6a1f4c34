//! Layered run configuration: command-line flags override the config file,
//! which overrides `VALUESIM_*` environment variables, which override
//! built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::experiment::{ExperimentConfig, MAIN_METHODS};
use crate::eval::MethodTag;
use crate::gateway::cache::Cache;
use crate::gateway::live::live_backends_from_env;
use crate::gateway::mock::{MockChat, MockEmbed};
use crate::gateway::{Gateway, GatewayOptions};

/// Which provider pair serves completions and embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Mock,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<BackendKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(BackendKind::Live),
            "mock" => Ok(BackendKind::Mock),
            other => Err(Error::Config(format!(
                "unknown backend '{other}' (expected 'live' or 'mock')"
            ))),
        }
    }
}

/// One layer of settings; `None` means "not set at this layer".
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub bank: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
    pub model: Option<String>,
    pub embedding_model: Option<String>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub scale_steps: Option<Vec<usize>>,
    pub sample: Option<usize>,
    pub rag_k: Option<usize>,
    pub workers: Option<usize>,
    pub backend: Option<BackendKind>,
    pub mock_script: Option<PathBuf>,
}

fn parse_env<T: FromStr>(name: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| Error::Config(format!("invalid {name}='{raw}': {e}")))
}

fn parse_env_list<T: FromStr>(name: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_env(name, s))
        .collect()
}

impl PartialConfig {
    /// Later layers win: every field set on `self` shadows `lower`.
    pub fn or(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            bank: self.bank.or(lower.bank),
            profiles: self.profiles.or(lower.profiles),
            cache_dir: self.cache_dir.or(lower.cache_dir),
            run_dir: self.run_dir.or(lower.run_dir),
            model: self.model.or(lower.model),
            embedding_model: self.embedding_model.or(lower.embedding_model),
            seed: self.seed.or(lower.seed),
            folds: self.folds.or(lower.folds),
            methods: self.methods.or(lower.methods),
            scale_steps: self.scale_steps.or(lower.scale_steps),
            sample: self.sample.or(lower.sample),
            rag_k: self.rag_k.or(lower.rag_k),
            workers: self.workers.or(lower.workers),
            backend: self.backend.or(lower.backend),
            mock_script: self.mock_script.or(lower.mock_script),
        }
    }

    /// Parse a TOML config file.
    pub fn from_file(path: &Path) -> Result<PartialConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config file {}: {e}", path.display())))
    }

    /// Read the `VALUESIM_*` environment layer through a lookup function
    /// (the process environment in production, a map in tests).
    pub fn from_env_with(get: impl Fn(&str) -> Option<String>) -> Result<PartialConfig> {
        let var = |suffix: &str| get(&format!("VALUESIM_{suffix}"));
        Ok(PartialConfig {
            bank: var("BANK").map(PathBuf::from),
            profiles: var("PROFILES").map(PathBuf::from),
            cache_dir: var("CACHE_DIR").map(PathBuf::from),
            run_dir: var("RUN_DIR").map(PathBuf::from),
            model: var("MODEL"),
            embedding_model: var("EMBEDDING_MODEL"),
            seed: var("SEED")
                .map(|v| parse_env("VALUESIM_SEED", &v))
                .transpose()?,
            folds: var("FOLDS")
                .map(|v| parse_env("VALUESIM_FOLDS", &v))
                .transpose()?,
            methods: var("METHODS").map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }),
            scale_steps: var("SCALE_STEPS")
                .map(|v| parse_env_list("VALUESIM_SCALE_STEPS", &v))
                .transpose()?,
            sample: var("SAMPLE")
                .map(|v| parse_env("VALUESIM_SAMPLE", &v))
                .transpose()?,
            rag_k: var("RAG_K")
                .map(|v| parse_env("VALUESIM_RAG_K", &v))
                .transpose()?,
            workers: var("WORKERS")
                .map(|v| parse_env("VALUESIM_WORKERS", &v))
                .transpose()?,
            backend: var("BACKEND")
                .map(|v| BackendKind::from_str(&v))
                .transpose()?,
            mock_script: var("MOCK_SCRIPT").map(PathBuf::from),
        })
    }

    pub fn from_env() -> Result<PartialConfig> {
        PartialConfig::from_env_with(|name| std::env::var(name).ok())
    }
}

/// The fully resolved configuration a run executes with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub bank: PathBuf,
    pub profiles: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub run_dir: PathBuf,
    pub model: String,
    pub embedding_model: String,
    pub seed: u64,
    pub folds: usize,
    pub methods: Vec<MethodTag>,
    pub scale_steps: Vec<usize>,
    pub sample: Option<usize>,
    pub rag_k: usize,
    pub workers: usize,
    pub backend: BackendKind,
    pub mock_script: Option<PathBuf>,
}

fn parse_methods(names: &[String]) -> Result<Vec<MethodTag>> {
    let mut methods = Vec::with_capacity(names.len());
    for name in names {
        let tag = MethodTag::parse(name).ok_or_else(|| {
            let known: Vec<&str> = MethodTag::ALL.iter().map(|m| m.label()).collect();
            Error::Config(format!(
                "unknown method '{name}' (known: {})",
                known.join(", ")
            ))
        })?;
        if methods.contains(&tag) {
            return Err(Error::Config(format!("method '{name}' listed twice")));
        }
        methods.push(tag);
    }
    Ok(methods)
}

/// Resolve the four layers into a complete configuration. `flags` is the
/// highest-precedence layer; the file layer is read from `config_file` when
/// one was given.
pub fn resolve(flags: PartialConfig, config_file: Option<&Path>) -> Result<RunConfig> {
    let mut layered = flags;
    if let Some(path) = config_file {
        layered = layered.or(PartialConfig::from_file(path)?);
    }
    layered = layered.or(PartialConfig::from_env()?);
    resolve_layered(layered)
}

/// Resolve an already-merged layer stack against the defaults.
pub fn resolve_layered(layered: PartialConfig) -> Result<RunConfig> {
    let bank = layered
        .bank
        .ok_or_else(|| Error::Config("no question bank path configured (--bank)".to_string()))?;
    let profiles = layered.profiles.ok_or_else(|| {
        Error::Config("no profiles path configured (--profiles)".to_string())
    })?;
    let methods = match layered.methods {
        Some(names) => {
            let parsed = parse_methods(&names)?;
            if parsed.is_empty() {
                return Err(Error::Config("empty method list".to_string()));
            }
            parsed
        }
        None => MAIN_METHODS.to_vec(),
    };
    let config = RunConfig {
        bank,
        profiles,
        cache_dir: layered.cache_dir,
        run_dir: layered.run_dir.unwrap_or_else(|| PathBuf::from("valuesim-run")),
        model: layered.model.unwrap_or_else(|| "gpt-3.5-turbo".to_string()),
        embedding_model: layered
            .embedding_model
            .unwrap_or_else(|| "text-embedding-3-small".to_string()),
        seed: layered.seed.unwrap_or(7),
        folds: layered.folds.unwrap_or(5),
        methods,
        scale_steps: layered
            .scale_steps
            .unwrap_or_else(|| vec![0, 58, 116, 174, 232]),
        sample: layered.sample,
        rag_k: layered.rag_k.unwrap_or(3),
        workers: layered.workers.unwrap_or(8),
        backend: layered.backend.unwrap_or(BackendKind::Live),
        mock_script: layered.mock_script,
    };
    if config.folds < 2 {
        return Err(Error::Config(format!(
            "fold count must be at least 2, got {}",
            config.folds
        )));
    }
    if config.workers == 0 {
        return Err(Error::Config("worker count must be at least 1".to_string()));
    }
    if config.rag_k == 0 {
        return Err(Error::Config("rag_k must be at least 1".to_string()));
    }
    Ok(config)
}

impl RunConfig {
    /// The experiment-layer view of this configuration.
    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            model_id: self.model.clone(),
            embedding_model_id: self.embedding_model.clone(),
            seed: self.seed,
            folds: self.folds,
            methods: self.methods.clone(),
            respondent_sample: self.sample,
            scale_steps: self.scale_steps.clone(),
            rag_k: self.rag_k,
            workers: self.workers,
            index_cache_dir: self.cache_dir.as_ref().map(|d| d.join("indices")),
        }
    }

    /// Build the configured gateway. The backend invariants are enforced
    /// here, where a backend instance is actually created: the mock backend
    /// requires a script file and the live backend requires credentials.
    pub fn build_gateway(&self) -> Result<Gateway> {
        let (chat, embed): (Arc<dyn crate::gateway::ChatBackend>, Arc<dyn crate::gateway::EmbedBackend>) =
            match self.backend {
                BackendKind::Mock => {
                    let script = self.mock_script.as_ref().ok_or_else(|| {
                        Error::Config(
                            "the mock backend requires a script file (--script)".to_string(),
                        )
                    })?;
                    (
                        Arc::new(MockChat::from_file(script)?),
                        Arc::new(MockEmbed::default()),
                    )
                }
                BackendKind::Live => {
                    let (chat, embed) = live_backends_from_env()?;
                    (chat, embed)
                }
            };
        let cache = match &self.cache_dir {
            Some(dir) => Some(Cache::open(&dir.join("gateway"))?),
            None => None,
        };
        Ok(Gateway::new(chat, embed, cache, GatewayOptions::default()))
    }

    /// The manifest's `config` field: the resolved configuration as JSON.
    pub fn as_manifest_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}

/// A `BTreeMap`-backed environment for tests and embedding callers.
pub fn env_from_map(map: BTreeMap<String, String>) -> impl Fn(&str) -> Option<String> {
    move |name| map.get(name).cloned()
}
