//! Declarative run configuration: a single TOML file, every field
//! overridable from the command line.

use crate::analysis::RunStrategy;
use crate::backends::NoiseProfile;
use crate::metrics::UnpairedPolicy;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which strategies a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    Taco,
    Tasi,
    Both,
}

impl StrategyChoice {
    pub fn runs(&self) -> Vec<RunStrategy> {
        match self {
            StrategyChoice::Taco => vec![RunStrategy::Taco],
            StrategyChoice::Tasi => vec![RunStrategy::Tasi],
            StrategyChoice::Both => vec![RunStrategy::Taco, RunStrategy::Tasi],
        }
    }
}

impl std::str::FromStr for StrategyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "taco" => Ok(StrategyChoice::Taco),
            "tasi" => Ok(StrategyChoice::Tasi),
            "both" => Ok(StrategyChoice::Both),
            other => Err(format!("unknown strategy '{other}' (taco|tasi|both)")),
        }
    }
}

/// Completion backend selection. Credentials come from the named
/// environment variable, never from the file itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Http {
        base_url: String,
        model: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default = "default_max_new_tokens")]
        max_new_tokens: u32,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default)]
        requests_per_sec: Option<f64>,
        #[serde(default = "default_retry_attempts")]
        retry_attempts: u32,
        #[serde(default = "default_retry_backoff_ms")]
        retry_backoff_ms: u64,
        #[serde(default)]
        retry_on_truncation: bool,
    },
    Mock {
        #[serde(default = "default_mock_text")]
        text: String,
    },
    Oracle {
        #[serde(default)]
        noise: NoiseProfile,
    },
}

impl BackendConfig {
    pub fn model_name(&self) -> String {
        match self {
            BackendConfig::Http { model, .. } => model.clone(),
            BackendConfig::Mock { .. } => "mock".into(),
            BackendConfig::Oracle { .. } => "oracle".into(),
        }
    }
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_max_new_tokens() -> u32 {
    256
}

fn default_temperature() -> f64 {
    0.4
}

fn default_retry_attempts() -> u32 {
    3
}

fn default_retry_backoff_ms() -> u64 {
    1000
}

fn default_mock_text() -> String {
    "{}".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    #[default]
    Offline,
    Remote {
        base_url: String,
        model: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
    },
}

/// Paths to template files overriding the shipped defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TemplateOverrides {
    pub taco: Option<PathBuf>,
    pub tasi_phase1: Option<PathBuf>,
    pub tasi_phase2: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyChoice,
    pub backend: BackendConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default = "default_fuzzy_threshold")]
    pub fuzzy_threshold: f64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub unpaired_policy: UnpairedPolicy,
    #[serde(default)]
    pub templates: TemplateOverrides,
    /// Process only the first N reports; unset runs everything.
    #[serde(default)]
    pub limit: Option<usize>,
}

fn default_strategy() -> StrategyChoice {
    StrategyChoice::Taco
}

fn default_fuzzy_threshold() -> f64 {
    crate::metrics::DEFAULT_FUZZY_THRESHOLD
}

fn default_concurrency() -> usize {
    1
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from(".sympcoder-cache")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("sympcoder-out")
}

impl RunConfig {
    /// A minimal offline configuration: zero-noise oracle backend, offline
    /// embedder, integrated strategy.
    pub fn offline_defaults(dataset: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            strategy: default_strategy(),
            backend: BackendConfig::Oracle {
                noise: NoiseProfile::default(),
            },
            embedder: EmbedderConfig::default(),
            fuzzy_threshold: default_fuzzy_threshold(),
            concurrency: default_concurrency(),
            cache_dir: default_cache_dir(),
            output_dir: default_output_dir(),
            unpaired_policy: UnpairedPolicy::default(),
            templates: TemplateOverrides::default(),
            limit: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&body).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.fuzzy_threshold > 0.0 && self.fuzzy_threshold <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "fuzzy_threshold {} outside (0, 1]",
                self.fuzzy_threshold
            )));
        }
        if self.concurrency < 1 {
            return Err(ConfigError::Invalid("concurrency must be at least 1".into()));
        }
        if !self.dataset.exists() {
            return Err(ConfigError::Invalid(format!(
                "dataset path {} does not exist",
                self.dataset.display()
            )));
        }
        if let BackendConfig::Http {
            base_url,
            temperature,
            max_new_tokens,
            ..
        } = &self.backend
        {
            if base_url.is_empty() {
                return Err(ConfigError::Invalid("backend.base_url is empty".into()));
            }
            if *max_new_tokens < 1 {
                return Err(ConfigError::Invalid("backend.max_new_tokens must be at least 1".into()));
            }
            if !(0.0..=2.0).contains(temperature) {
                return Err(ConfigError::Invalid(format!(
                    "backend.temperature {temperature} outside [0.0, 2.0]"
                )));
            }
        }
        for path in [
            self.templates.taco.as_ref(),
            self.templates.tasi_phase1.as_ref(),
            self.templates.tasi_phase2.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !path.exists() {
                return Err(ConfigError::Invalid(format!(
                    "template override {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}
