//! Merged operator configuration: defaults, then a JSON file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineConfig;
use crate::sim::{AgentParams, ExperimentConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub port: u16,
    pub ws_port: u16,
    pub log_dir: PathBuf,
    pub bind: String,
    pub tick_ms: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            port: 7070,
            ws_port: 8080,
            log_dir: PathBuf::from("logs"),
            bind: "127.0.0.1".to_string(),
            tick_ms: 10,
        }
    }
}

/// All sections of the operator config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub engine: EngineConfig,
    pub agent: AgentParams,
    pub experiment: ExperimentConfig,
    pub net: NetConfig,
}

impl CliConfig {
    pub fn from_json_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Defaults overlaid by the file at `path`, if given.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        CliConfig::from_json_str(&text, path)
    }

    /// The experiment section with the engine and agent sections attached.
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            engine: self.engine.clone(),
            agent: self.agent.clone(),
            ..self.experiment.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.engine.validate()?;
        self.agent.validate()?;
        self.experiment.validate()?;
        if self.net.tick_ms == 0 {
            return Err(ConfigError::invalid("net.tick_ms", "must be > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_defaults() {
        let c = CliConfig::from_json_str("{}", Path::new("x.json")).unwrap();
        assert_eq!(c, CliConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn sections_overlay_defaults() {
        let c = CliConfig::from_json_str(
            r#"{"engine": {"dwell_ms": 400}, "net": {"port": 9000}}"#,
            Path::new("x.json"),
        )
        .unwrap();
        assert_eq!(c.engine.dwell_ms, 400);
        assert_eq!(c.engine.gap_tolerance_ms, 50);
        assert_eq!(c.net.port, 9000);
        assert_eq!(c.net.ws_port, 8080);
    }

    #[test]
    fn unknown_section_is_rejected() {
        assert!(CliConfig::from_json_str(r#"{"engin": {}}"#, Path::new("x.json")).is_err());
    }
}
