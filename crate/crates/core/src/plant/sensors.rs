use serde::{Deserialize, Serialize};

use crate::domain::SensorId;

/// Pressure-induced reading bias `b(P) = c1 * P + c2 * P^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorBias {
    pub c1: f64,
    pub c2: f64,
}

impl SensorBias {
    pub const NONE: SensorBias = SensorBias { c1: 0.0, c2: 0.0 };

    pub fn at(&self, pressure: f64) -> f64 {
        self.c1 * pressure + self.c2 * pressure * pressure
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorBiases {
    pub dissolved_o2: SensorBias,
    pub ph: SensorBias,
    pub conductivity: SensorBias,
    pub temperature: SensorBias,
    pub pressure: SensorBias,
}

impl Default for SensorBiases {
    fn default() -> Self {
        Self {
            dissolved_o2: SensorBias { c1: 0.08, c2: 0.004 },
            ph: SensorBias { c1: 0.004, c2: 0.0003 },
            conductivity: SensorBias { c1: 1.5, c2: 0.05 },
            temperature: SensorBias { c1: 0.002, c2: 0.0 },
            pressure: SensorBias { c1: 0.02, c2: 0.0002 },
        }
    }
}

impl SensorBiases {
    pub fn zero() -> Self {
        Self {
            dissolved_o2: SensorBias::NONE,
            ph: SensorBias::NONE,
            conductivity: SensorBias::NONE,
            temperature: SensorBias::NONE,
            pressure: SensorBias::NONE,
        }
    }

    pub fn get(&self, sensor: SensorId) -> SensorBias {
        match sensor {
            SensorId::DissolvedO2 => self.dissolved_o2,
            SensorId::Ph => self.ph,
            SensorId::Conductivity => self.conductivity,
            SensorId::Temperature => self.temperature,
            SensorId::Pressure => self.pressure,
            SensorId::SpecificGravity => SensorBias::NONE,
        }
    }
}

/// One-sigma accuracy of each installed sensor, in its own unit.
pub fn accuracy(sensor: SensorId) -> f64 {
    match sensor {
        SensorId::DissolvedO2 => 0.05,
        SensorId::Ph => 0.002,
        // Not rated by the vendor; 2 µS/cm at the ~1500 µS/cm working point.
        SensorId::Conductivity => 2.0,
        SensorId::Temperature => 0.01,
        SensorId::Pressure => 0.006,
        SensorId::SpecificGravity => 0.001,
    }
}
