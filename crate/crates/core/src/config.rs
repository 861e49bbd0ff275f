//! Run configuration: a `key = value` TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::resolver::BackendMode;
use crate::scorer::AggregationConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// File form; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kb: Option<PathBuf>,
    kb_fixture: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    models: Option<PathBuf>,
    mode: Option<String>,
    k_neighbors: Option<usize>,
    trim: Option<usize>,
    min_support: Option<usize>,
    exceptions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub kb_dump_path: Option<PathBuf>,
    pub fixture_path: Option<PathBuf>,
    pub embeddings_path: Option<PathBuf>,
    pub relation_models_path: Option<PathBuf>,
    pub mode: BackendMode,
    pub k_neighbors: usize,
    pub trim: usize,
    pub min_support: usize,
    pub exception_table_path: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        let agg = AggregationConfig::default();
        Config {
            kb_dump_path: None,
            fixture_path: None,
            embeddings_path: None,
            relation_models_path: None,
            mode: BackendMode::KbOnly,
            k_neighbors: agg.k,
            trim: agg.trim,
            min_support: 1,
            exception_table_path: None,
        }
    }
}

/// Values given on the command line; `Some` wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kb: Option<PathBuf>,
    pub kb_fixture: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub mode: Option<BackendMode>,
    pub k_neighbors: Option<usize>,
    pub trim: Option<usize>,
    pub min_support: Option<usize>,
    pub exceptions: Option<PathBuf>,
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self, ConfigError> {
        let file = match path {
            None => ConfigFile::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse {
                    path: p.to_path_buf(),
                    message: e.message().to_string(),
                })?
            }
        };
        let file_mode = file
            .mode
            .as_deref()
            .map(str::parse::<BackendMode>)
            .transpose()
            .map_err(ConfigError::Invalid)?;
        let d = Config::default();
        let cfg = Config {
            kb_dump_path: overrides.kb.or(file.kb),
            fixture_path: overrides.kb_fixture.or(file.kb_fixture),
            embeddings_path: overrides.embeddings.or(file.embeddings),
            relation_models_path: overrides.models.or(file.models),
            mode: overrides.mode.or(file_mode).unwrap_or(d.mode),
            k_neighbors: overrides
                .k_neighbors
                .or(file.k_neighbors)
                .unwrap_or(d.k_neighbors),
            trim: overrides.trim.or(file.trim).unwrap_or(d.trim),
            min_support: overrides
                .min_support
                .or(file.min_support)
                .unwrap_or(d.min_support),
            exception_table_path: overrides.exceptions.or(file.exceptions),
        };
        cfg.aggregation()?;
        Ok(cfg)
    }

    pub fn aggregation(&self) -> Result<AggregationConfig, ConfigError> {
        AggregationConfig::new(self.k_neighbors, self.trim)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn has_kb(&self) -> bool {
        self.kb_dump_path.is_some() || self.fixture_path.is_some()
    }

    /// Check that the paths the mode needs are configured.
    pub fn validate_for(&self, mode: BackendMode) -> Result<(), ConfigError> {
        let needs_kb = matches!(mode, BackendMode::KbOnly | BackendMode::Hybrid);
        let needs_fallback = matches!(mode, BackendMode::FallbackOnly | BackendMode::Hybrid);
        if needs_kb && !self.has_kb() {
            return Err(ConfigError::Invalid(format!(
                "mode {mode} needs --kb or --kb-fixture"
            )));
        }
        if needs_fallback && self.embeddings_path.is_none() {
            return Err(ConfigError::Invalid(format!(
                "mode {mode} needs --embeddings"
            )));
        }
        if needs_fallback && self.relation_models_path.is_none() && !self.has_kb() {
            return Err(ConfigError::Invalid(format!(
                "mode {mode} needs --models, or a knowledge base to train them from"
            )));
        }
        Ok(())
    }
}
