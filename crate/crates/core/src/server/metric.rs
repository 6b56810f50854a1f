use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::SensorId;

/// A stored series within a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DissolvedO2,
    Ph,
    Conductivity,
    Temperature,
    Pressure,
    SpecificGravity,
    /// Hydrometer temperature, inside the tank.
    TankTemperature,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown metric {0:?}")]
pub struct UnknownMetric(pub String);

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::DissolvedO2,
        Metric::Ph,
        Metric::Conductivity,
        Metric::Temperature,
        Metric::Pressure,
        Metric::SpecificGravity,
        Metric::TankTemperature,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::DissolvedO2 => "dissolved_o2",
            Metric::Ph => "ph",
            Metric::Conductivity => "conductivity",
            Metric::Temperature => "temperature",
            Metric::Pressure => "pressure",
            Metric::SpecificGravity => "specific_gravity",
            Metric::TankTemperature => "tank_temperature",
        }
    }

    pub fn from_sensor(sensor: SensorId) -> Metric {
        match sensor {
            SensorId::DissolvedO2 => Metric::DissolvedO2,
            SensorId::Ph => Metric::Ph,
            SensorId::Conductivity => Metric::Conductivity,
            SensorId::Temperature => Metric::Temperature,
            SensorId::Pressure => Metric::Pressure,
            SensorId::SpecificGravity => Metric::SpecificGravity,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMetric(s.to_owned()))
    }
}
