use std::fmt;

use serde::{Deserialize, Serialize};

use super::ValveId;
use crate::domain::SensorId;

/// Injectable failure. Faults are independent and several may be active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FaultKind {
    PowerLoss,
    ValveStuckClosed { valve: ValveId },
    ValveStuckOpen { valve: ValveId },
    SensorFailure { sensor: SensorId },
    SensorDrift { sensor: SensorId, offset: f64 },
    NetworkPartition,
}

impl FaultKind {
    /// Two faults occupy the same slot when injecting one should replace the
    /// other. A valve can only be stuck one way and a sensor carries a single
    /// drift offset.
    pub fn same_slot(&self, other: &FaultKind) -> bool {
        use FaultKind::*;
        match (self, other) {
            (PowerLoss, PowerLoss) | (NetworkPartition, NetworkPartition) => true,
            (
                ValveStuckClosed { valve: a } | ValveStuckOpen { valve: a },
                ValveStuckClosed { valve: b } | ValveStuckOpen { valve: b },
            ) => a == b,
            (SensorFailure { sensor: a }, SensorFailure { sensor: b }) => a == b,
            (SensorDrift { sensor: a, .. }, SensorDrift { sensor: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::PowerLoss => f.write_str("power_loss"),
            FaultKind::ValveStuckClosed { valve } => write!(f, "valve_stuck_closed({valve})"),
            FaultKind::ValveStuckOpen { valve } => write!(f, "valve_stuck_open({valve})"),
            FaultKind::SensorFailure { sensor } => write!(f, "sensor_failure({sensor})"),
            FaultKind::SensorDrift { sensor, offset } => {
                write!(f, "sensor_drift({sensor}, {offset:+})")
            }
            FaultKind::NetworkPartition => f.write_str("network_partition"),
        }
    }
}
