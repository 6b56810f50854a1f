use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::harness::Speed;
use crate::controller::StateTimeouts;
use crate::domain::{validate_config, BatchConfig, CommandKind, ConfigError, Origin, WallMs};
use crate::plant::{FaultKind, PlantParams};
use crate::protocol::LinkParams;

pub const DEFAULT_SEED: u64 = 42;
/// 2023-11-14T22:13:20Z, the wall-clock instant simulated time 0 maps to.
pub const DEFAULT_EPOCH_MS: WallMs = 1_700_000_000_000;

/// A reproducible run: configuration plus a schedule of faults and operator
/// actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Upper bound on simulated time.
    pub duration_ms: u64,
    /// Stop early once this many cycles have completed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after_cycles: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_epoch")]
    pub epoch_ms: WallMs,
    #[serde(default)]
    pub batch: BatchConfig,
    #[serde(default)]
    pub plant: PlantParams,
    #[serde(default)]
    pub link: LinkParams,
    #[serde(default)]
    pub timeouts: StateTimeouts,
    #[serde(default)]
    pub speed: Speed,
    #[serde(default)]
    pub events: Vec<ScheduledEvent>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_epoch() -> WallMs {
    DEFAULT_EPOCH_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub at_ms: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Inject { fault: FaultKind },
    Clear { fault: FaultKind },
    /// Remote commands go through the server API; physical ones are entered
    /// at the rig console.
    Command { origin: Origin, command: CommandKind },
    /// Confirms every command waiting for a confirmation.
    ConfirmPending { origin: Origin },
    AcknowledgeAlerts { origin: Origin },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid batch configuration: {}", join(.0))]
    Batch(Vec<ConfigError>),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown bundled scenario {0:?}")]
    Unknown(String),
}

fn join(errs: &[ConfigError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Scenario {
    /// A scenario with default configuration and no events.
    pub fn nominal(name: impl Into<String>, duration_ms: u64) -> Self {
        Self {
            name: name.into(),
            description: String::new(),
            duration_ms,
            stop_after_cycles: None,
            seed: DEFAULT_SEED,
            epoch_ms: DEFAULT_EPOCH_MS,
            batch: BatchConfig::default(),
            plant: PlantParams::default(),
            link: LinkParams::default(),
            timeouts: StateTimeouts::default(),
            speed: Speed::Max,
            events: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        validate_config(self.batch.clone()).map_err(ScenarioError::Batch)?;
        if let Some(ev) = self.events.iter().find(|e| e.at_ms > self.duration_ms) {
            return Err(ScenarioError::Invalid(format!(
                "event at {} ms after the {} ms duration",
                ev.at_ms, self.duration_ms
            )));
        }
        if !self.plant.fermentation.is_valid() {
            return Err(ScenarioError::Invalid("fermentation model parameters".into()));
        }
        if self.events.windows(2).any(|w| w[1].at_ms < w[0].at_ms) {
            return Err(ScenarioError::Invalid("events must be sorted by at_ms".into()));
        }
        Ok(())
    }
}
