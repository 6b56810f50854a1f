use std::fmt;
use std::ops::Deref;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{duration_ms, PressureBar};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BatchId(pub String);

impl BatchId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const MIN_SAMPLING_INTERVAL: Duration = Duration::from_secs(5);
pub const MAX_SAMPLING_INTERVAL: Duration = Duration::from_secs(15 * 60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub batch_id: BatchId,
    pub original_gravity: f64,
    pub expected_final_gravity: f64,
    #[serde(rename = "sampling_interval_ms", with = "duration_ms")]
    pub sampling_interval: Duration,
    pub pressure_setpoint: PressureBar,
    pub shutdown_threshold: PressureBar,
    pub relief_threshold: PressureBar,
    #[serde(rename = "safety_response_deadline_ms", with = "duration_ms")]
    pub safety_response_deadline: Duration,
    #[serde(rename = "stabilization_time_ms", with = "duration_ms")]
    pub stabilization_time: Duration,
    pub readings_per_sensor: u32,
    pub cycles_per_direction: u32,
}

impl BatchConfig {
    pub fn new(batch_id: impl Into<String>) -> Self {
        Self {
            batch_id: BatchId::new(batch_id),
            ..Self::default()
        }
    }
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            batch_id: BatchId::new("batch-1"),
            original_gravity: 1.060,
            expected_final_gravity: 1.010,
            sampling_interval: MIN_SAMPLING_INTERVAL,
            pressure_setpoint: PressureBar(7.0),
            shutdown_threshold: PressureBar(8.0),
            relief_threshold: PressureBar(10.0),
            safety_response_deadline: Duration::from_millis(500),
            stabilization_time: Duration::from_secs(30),
            readings_per_sensor: 10,
            cycles_per_direction: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("sampling interval {0:?} outside [5 s, 15 min]")]
    IntervalOutOfRange(Duration),
    #[error("thresholds must satisfy setpoint < shutdown < relief <= 15 bar: {0}")]
    ThresholdOrderingViolated(String),
    #[error("{0} must be positive")]
    NonPositiveDuration(&'static str),
    #[error("{0}")]
    InvalidCount(String),
    #[error("gravity: {0}")]
    GravityOutOfRange(String),
}

/// A [`BatchConfig`] that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig(BatchConfig);

impl ValidatedConfig {
    pub fn into_inner(self) -> BatchConfig {
        self.0
    }
}

impl Deref for ValidatedConfig {
    type Target = BatchConfig;

    fn deref(&self) -> &BatchConfig {
        &self.0
    }
}

impl<'de> Deserialize<'de> for ValidatedConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let cfg = BatchConfig::deserialize(d)?;
        validate_config(cfg).map_err(|errs| {
            let msgs: Vec<String> = errs.iter().map(ToString::to_string).collect();
            serde::de::Error::custom(msgs.join("; "))
        })
    }
}

/// Returns the config unchanged iff every constraint holds, otherwise every
/// violated constraint.
pub fn validate_config(cfg: BatchConfig) -> Result<ValidatedConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();

    if cfg.sampling_interval < MIN_SAMPLING_INTERVAL || cfg.sampling_interval > MAX_SAMPLING_INTERVAL
    {
        errors.push(ConfigError::IntervalOutOfRange(cfg.sampling_interval));
    }

    let (sp, sd, rl) = (
        cfg.pressure_setpoint.0,
        cfg.shutdown_threshold.0,
        cfg.relief_threshold.0,
    );
    if !(sp >= 0.0) {
        errors.push(ConfigError::ThresholdOrderingViolated(format!(
            "setpoint {sp} below atmospheric"
        )));
    }
    if !(sp < sd) {
        errors.push(ConfigError::ThresholdOrderingViolated(format!(
            "setpoint {sp} >= shutdown {sd}"
        )));
    }
    if !(sd < rl) {
        errors.push(ConfigError::ThresholdOrderingViolated(format!(
            "shutdown {sd} >= relief {rl}"
        )));
    }
    if !(rl <= PressureBar::BURST.0) {
        errors.push(ConfigError::ThresholdOrderingViolated(format!(
            "relief {rl} above 15 bar burst rating"
        )));
    }

    for (name, d) in [
        ("safety_response_deadline", cfg.safety_response_deadline),
        ("stabilization_time", cfg.stabilization_time),
    ] {
        if d.is_zero() {
            errors.push(ConfigError::NonPositiveDuration(name));
        }
    }

    if cfg.readings_per_sensor < 2 {
        errors.push(ConfigError::InvalidCount(format!(
            "readings_per_sensor {} < 2",
            cfg.readings_per_sensor
        )));
    }
    if cfg.cycles_per_direction == 0 {
        errors.push(ConfigError::InvalidCount("cycles_per_direction is 0".into()));
    }

    let (og, fg) = (cfg.original_gravity, cfg.expected_final_gravity);
    let (lo, hi) = super::SG_RANGE;
    for (name, sg) in [("original", og), ("expected final", fg)] {
        if !(lo..=hi).contains(&sg) {
            errors.push(ConfigError::GravityOutOfRange(format!(
                "{name} gravity {sg} outside [{lo}, {hi}]"
            )));
        }
    }
    if !(og > fg) {
        errors.push(ConfigError::GravityOutOfRange(format!(
            "original gravity {og} <= final gravity {fg}"
        )));
    }

    if errors.is_empty() {
        Ok(ValidatedConfig(cfg))
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = BatchConfig::default();
        let v = validate_config(cfg.clone()).unwrap();
        assert_eq!(*v, cfg);
    }

    #[test]
    fn four_second_interval_rejected() {
        let cfg = BatchConfig {
            sampling_interval: Duration::from_secs(4),
            ..BatchConfig::default()
        };
        let errs = validate_config(cfg).unwrap_err();
        assert_eq!(errs, vec![ConfigError::IntervalOutOfRange(Duration::from_secs(4))]);
    }

    #[test]
    fn interval_bounds_are_inclusive() {
        for secs in [5, 900] {
            let cfg = BatchConfig {
                sampling_interval: Duration::from_secs(secs),
                ..BatchConfig::default()
            };
            assert!(validate_config(cfg).is_ok());
        }
        let cfg = BatchConfig {
            sampling_interval: Duration::from_secs(901),
            ..BatchConfig::default()
        };
        assert!(validate_config(cfg).is_err());
    }

    #[test]
    fn equal_setpoint_and_shutdown_violates_ordering() {
        let cfg = BatchConfig {
            pressure_setpoint: PressureBar(7.0),
            shutdown_threshold: PressureBar(7.0),
            ..BatchConfig::default()
        };
        let errs = validate_config(cfg).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(matches!(errs[0], ConfigError::ThresholdOrderingViolated(_)));
    }

    #[test]
    fn reports_every_violation_at_once() {
        let cfg = BatchConfig {
            sampling_interval: Duration::from_secs(1),
            shutdown_threshold: PressureBar(11.0),
            relief_threshold: PressureBar(16.0),
            stabilization_time: Duration::ZERO,
            ..BatchConfig::default()
        };
        let errs = validate_config(cfg).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, ConfigError::IntervalOutOfRange(_))));
        assert!(errs.iter().any(|e| matches!(e, ConfigError::ThresholdOrderingViolated(_))));
        assert!(errs.iter().any(|e| matches!(e, ConfigError::NonPositiveDuration(_))));
        assert_eq!(errs.len(), 3);
    }

    #[test]
    fn validation_is_idempotent() {
        let v = validate_config(BatchConfig::default()).unwrap();
        let again = validate_config(v.clone().into_inner()).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn json_uses_millisecond_durations() {
        let s = crate::domain::codec::to_string(&BatchConfig::default()).unwrap();
        assert!(s.contains(r#""sampling_interval_ms":5000"#), "{s}");
        assert!(s.contains(r#""original_gravity":1.0600"#), "{s}");
    }
}
