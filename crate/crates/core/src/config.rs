//! TOML configuration shared by the CLI commands and the service.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{remote_backend, retrieval_index, Backend, ChatError};
use crate::dialogue::{bundled_pairs, read_pairs, BuilderConfig};
use crate::fingerprint::FingerprintConfig;
use crate::tasks::{PretrainSources, TaskConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("configured path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("backend: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    /// TF-IDF retrieval over a pair corpus; the bundled toy pairs when no path is given.
    Retrieval {
        #[serde(default)]
        corpus: Option<PathBuf>,
    },
    Remote {
        url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Retrieval { corpus: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Session logs are written here as `<id>.jsonl` when set.
    pub log_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            log_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    /// Candidates per generation turn in chat.
    pub k: usize,
    pub fingerprint: FingerprintConfig,
    pub builder: BuilderConfig,
    pub tasks: TaskConfig,
    pub backend: BackendConfig,
    pub service: ServiceConfig,
    pub pretrain: PretrainSources,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            k: 3,
            fingerprint: FingerprintConfig::default(),
            builder: BuilderConfig::default(),
            tasks: TaskConfig::default(),
            backend: BackendConfig::default(),
            service: ServiceConfig::default(),
            pretrain: PretrainSources::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl Config {
    /// Parse a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Config = toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let BackendConfig::Retrieval { corpus } = &mut cfg.backend {
            rebase(base, corpus);
        }
        rebase(base, &mut cfg.service.log_dir);
        let p = &mut cfg.pretrain;
        for slot in [
            &mut p.text,
            &mut p.smiles,
            &mut p.properties,
            &mut p.lexicon,
            &mut p.pairs,
        ] {
            rebase(base, slot);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every configured input path must exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.pretrain;
        let mut paths: Vec<&PathBuf> = [&p.text, &p.smiles, &p.properties, &p.lexicon, &p.pairs]
            .into_iter()
            .flatten()
            .collect();
        if let BackendConfig::Retrieval { corpus: Some(c) } = &self.backend {
            paths.push(c);
        }
        match paths.into_iter().find(|p| !p.exists()) {
            Some(missing) => Err(ConfigError::MissingPath(missing.clone())),
            None => Ok(()),
        }
    }

    pub fn build_backend(&self) -> Result<Box<dyn Backend>, ConfigError> {
        match &self.backend {
            BackendConfig::Retrieval { corpus } => {
                let pairs = match corpus {
                    Some(p) => read_pairs(p).map_err(|e| ConfigError::Backend(e.to_string()))?,
                    None => bundled_pairs(),
                };
                let b = retrieval_index(&pairs, self.fingerprint)
                    .map_err(|e: ChatError| ConfigError::Backend(e.to_string()))?;
                Ok(Box::new(b))
            }
            BackendConfig::Remote { url, timeout_ms } => {
                let b = remote_backend(url, Duration::from_millis(*timeout_ms))
                    .map_err(|e| ConfigError::Backend(e.to_string()))?;
                Ok(Box::new(b))
            }
        }
    }
}
