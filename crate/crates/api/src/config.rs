//! The serve configuration: one flat TOML file for thresholds, retention,
//! ports and the optional built-in simulation.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use fermtwin_core::domain::{validate_config, BatchConfig, BatchId, ConfigError};
use fermtwin_core::scenario::Speed;
use fermtwin_core::server::ServerConfig;
use fermtwin_core::PressureBar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid batch settings: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Batch(Vec<ConfigError>),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: IpAddr,
    pub http_port: u16,
    /// TCP port a controller connects to. Unused while `simulate` is on.
    pub controller_port: u16,

    pub pressure_setpoint_bar: f64,
    pub shutdown_threshold_bar: f64,
    pub relief_threshold_bar: f64,
    pub safety_response_deadline_ms: u64,
    pub heartbeat_period_ms: u64,
    pub missed_beats: u32,

    pub raw_retention_days: u64,
    /// Append-only store file; in-memory when absent.
    pub store_path: Option<PathBuf>,

    pub batch_id: String,
    pub original_gravity: f64,
    pub expected_final_gravity: f64,
    pub sampling_interval_ms: u64,
    pub cycles_per_direction: u32,

    /// Run the plant and controller in-process instead of waiting for a
    /// controller on `controller_port`.
    pub simulate: bool,
    pub sim_speed: Speed,
    pub seed: u64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        let batch = BatchConfig::default();
        let server = ServerConfig::default();
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            http_port: 8080,
            controller_port: 7070,
            pressure_setpoint_bar: batch.pressure_setpoint.0,
            shutdown_threshold_bar: batch.shutdown_threshold.0,
            relief_threshold_bar: batch.relief_threshold.0,
            safety_response_deadline_ms: batch.safety_response_deadline.as_millis() as u64,
            heartbeat_period_ms: server.safety.heartbeat_period.as_millis() as u64,
            missed_beats: server.safety.missed_beats,
            raw_retention_days: server.raw_retention.as_secs() / 86_400,
            store_path: None,
            batch_id: batch.batch_id.as_str().to_owned(),
            original_gravity: batch.original_gravity,
            expected_final_gravity: batch.expected_final_gravity,
            sampling_interval_ms: batch.sampling_interval.as_millis() as u64,
            cycles_per_direction: batch.cycles_per_direction,
            simulate: true,
            sim_speed: Speed::Factor(1.0),
            seed: fermtwin_core::scenario::DEFAULT_SEED,
        }
    }
}

impl ServeConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigFileError> {
        let cfg: ServeConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigFileError> {
        validate_config(self.batch()).map_err(ConfigFileError::Batch)?;
        if self.heartbeat_period_ms == 0 {
            return Err(ConfigFileError::Invalid("heartbeat_period_ms must be positive".into()));
        }
        if self.raw_retention_days == 0 {
            return Err(ConfigFileError::Invalid("raw_retention_days must be positive".into()));
        }
        Ok(())
    }

    pub fn batch(&self) -> BatchConfig {
        BatchConfig {
            batch_id: BatchId::new(self.batch_id.clone()),
            original_gravity: self.original_gravity,
            expected_final_gravity: self.expected_final_gravity,
            sampling_interval: Duration::from_millis(self.sampling_interval_ms),
            pressure_setpoint: PressureBar(self.pressure_setpoint_bar),
            shutdown_threshold: PressureBar(self.shutdown_threshold_bar),
            relief_threshold: PressureBar(self.relief_threshold_bar),
            safety_response_deadline: Duration::from_millis(self.safety_response_deadline_ms),
            cycles_per_direction: self.cycles_per_direction,
            ..BatchConfig::default()
        }
    }

    pub fn server(&self) -> ServerConfig {
        let mut cfg = ServerConfig::for_batch(&self.batch());
        cfg.safety.heartbeat_period = Duration::from_millis(self.heartbeat_period_ms);
        cfg.safety.missed_beats = self.missed_beats;
        cfg.raw_retention = Duration::from_secs(self.raw_retention_days * 86_400);
        cfg
    }

    pub fn http_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.http_port)
    }

    pub fn controller_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.controller_port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ServeConfig::from_toml("").unwrap(), ServeConfig::default());
    }

    #[test]
    fn keys_map_onto_server_config() {
        let cfg = ServeConfig::from_toml(
            "http_port = 9000\nshutdown_threshold_bar = 7.5\nraw_retention_days = 7\nsim_speed = \"max\"\n",
        )
        .unwrap();
        assert_eq!(cfg.http_port, 9000);
        assert_eq!(cfg.sim_speed, Speed::Max);
        let server = cfg.server();
        assert_eq!(server.safety.shutdown_threshold, PressureBar(7.5));
        assert_eq!(server.raw_retention, Duration::from_secs(7 * 86_400));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(ServeConfig::from_toml("htp_port = 1"), Err(ConfigFileError::Parse(_))));
    }

    #[test]
    fn bad_interval_rejected() {
        let err = ServeConfig::from_toml("sampling_interval_ms = 1000").unwrap_err();
        assert!(matches!(err, ConfigFileError::Batch(_)));
    }
}
