//! Service configuration: one TOML file, overridden by `QRUNTIME_*` variables.
//!
//! ```toml
//! bind = "127.0.0.1"
//! port = 8080
//! token_file = "tokens.txt"
//! state_dir = "state"
//! poll_interval_secs = 60
//! staleness_limit_secs = 300
//! user_limit = 5
//! workers = 2
//! worker_parallelism = 1
//!
//! [[backends]]
//! id = "sim-linear-5"
//! num_qubits = 5
//! topology = "line"
//! ideal = false
//! time_dilation_us = 1.0
//! ```
//!
//! Relative paths are resolved against the directory of the file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::TimeDelta;
use serde::Deserialize;
use thiserror::Error;

use qruntime_core::backend::{default_fleet, DeviceConfig};
use qruntime_core::platform::PlatformConfig;
use qruntime_core::scheduler::SchedulerConfig;

pub const ENV_PREFIX: &str = "QRUNTIME_";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {key}: {value:?}")]
    Env { key: String, value: String },
}

/// One simulated device of the fleet.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BackendEntry {
    #[serde(flatten)]
    pub device: DeviceConfig,
    /// Zero noise, frozen drift and no simulated latency.
    #[serde(default)]
    pub ideal: bool,
}

impl BackendEntry {
    pub fn device_config(&self) -> DeviceConfig {
        if self.ideal {
            self.device.clone().ideal()
        } else {
            self.device.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub token_file: Option<PathBuf>,
    pub state_dir: Option<PathBuf>,
    pub poll_interval_secs: i64,
    pub staleness_limit_secs: i64,
    pub user_limit: usize,
    pub workers: usize,
    pub worker_parallelism: u32,
    pub backends: Vec<BackendEntry>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            token_file: None,
            state_dir: None,
            poll_interval_secs: 60,
            staleness_limit_secs: 300,
            user_limit: 5,
            workers: 2,
            worker_parallelism: 1,
            backends: default_fleet()
                .into_iter()
                .map(|device| BackendEntry { device, ideal: false })
                .collect(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads `path` (if given), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                let mut cfg = Self::from_toml(&text)?;
                let base = p.parent().unwrap_or(Path::new("."));
                cfg.token_file = cfg.token_file.map(|f| base.join(f));
                cfg.state_dir = cfg.state_dir.map(|d| base.join(d));
                cfg
            }
            None => ServiceConfig::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let bad = || ConfigError::Env {
                key: key.clone(),
                value: value.clone(),
            };
            match name {
                "BIND" => self.bind = value.clone(),
                "PORT" => self.port = value.parse().map_err(|_| bad())?,
                "TOKEN_FILE" => self.token_file = Some(PathBuf::from(&value)),
                "STATE_DIR" => self.state_dir = Some(PathBuf::from(&value)),
                "POLL_INTERVAL_SECS" => self.poll_interval_secs = value.parse().map_err(|_| bad())?,
                "STALENESS_LIMIT_SECS" => self.staleness_limit_secs = value.parse().map_err(|_| bad())?,
                "USER_LIMIT" => self.user_limit = value.parse().map_err(|_| bad())?,
                "WORKERS" => self.workers = value.parse().map_err(|_| bad())?,
                "WORKER_PARALLELISM" => self.worker_parallelism = value.parse().map_err(|_| bad())?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn platform(&self) -> Result<PlatformConfig, ConfigError> {
        if self.poll_interval_secs <= 0 || self.staleness_limit_secs <= 0 {
            return Err(ConfigError::Parse("intervals must be positive".into()));
        }
        if self.backends.is_empty() {
            return Err(ConfigError::Parse("at least one backend is required".into()));
        }
        Ok(PlatformConfig {
            fleet: self.backends.iter().map(BackendEntry::device_config).collect(),
            scheduler: SchedulerConfig {
                user_limit: self.user_limit,
                ..SchedulerConfig::default()
            },
            staleness_limit: TimeDelta::seconds(self.staleness_limit_secs),
            poll_interval: TimeDelta::seconds(self.poll_interval_secs),
            state_dir: self.state_dir.clone(),
            builtin_workers: self.workers,
            worker_parallelism: self.worker_parallelism.max(1),
            tick: Duration::from_millis(20),
            ..PlatformConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qruntime_core::backend::Topology;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ServiceConfig::from_toml("").unwrap(), ServiceConfig::default());
    }

    #[test]
    fn fleet_entries() {
        let cfg = ServiceConfig::from_toml(
            r#"
            port = 9000
            [[backends]]
            id = "quiet"
            num_qubits = 3
            ideal = true
            [[backends]]
            id = "ring"
            num_qubits = 6
            topology = "ring"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.port, 9000);
        let fleet = cfg.platform().unwrap().fleet;
        assert_eq!(fleet[0].error_2q, 0.0);
        assert_eq!(fleet[1].topology, Topology::Ring);
        assert!(fleet[1].error_2q > 0.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(ServiceConfig::from_toml("prot = 1").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = ServiceConfig::default();
        let vars = [
            ("QRUNTIME_PORT".to_string(), "0".to_string()),
            ("QRUNTIME_USER_LIMIT".to_string(), "2".to_string()),
            ("HOME".to_string(), "/x".to_string()),
        ];
        cfg.apply_env(vars).unwrap();
        assert_eq!((cfg.port, cfg.user_limit), (0, 2));
        let err = cfg.apply_env([("QRUNTIME_PORT".to_string(), "x".to_string())]).unwrap_err();
        assert!(matches!(err, ConfigError::Env { .. }));
    }
}
