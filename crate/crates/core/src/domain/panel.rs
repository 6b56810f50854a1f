use std::fmt;

use serde::{Deserialize, Serialize};

use super::PressureBar;

/// Every sensor the rig carries. The first five sit in the sampling chamber;
/// specific gravity comes from the floating hydrometer in the tank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorId {
    DissolvedO2,
    Ph,
    Conductivity,
    Temperature,
    Pressure,
    SpecificGravity,
}

impl SensorId {
    pub const CHAMBER: [SensorId; 5] = [
        SensorId::DissolvedO2,
        SensorId::Ph,
        SensorId::Conductivity,
        SensorId::Temperature,
        SensorId::Pressure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorId::DissolvedO2 => "dissolved_o2",
            SensorId::Ph => "ph",
            SensorId::Conductivity => "conductivity",
            SensorId::Temperature => "temperature",
            SensorId::Pressure => "pressure",
            SensorId::SpecificGravity => "specific_gravity",
        }
    }

    /// Inclusive measurement range of the installed sensor.
    pub fn valid_range(self) -> (f64, f64) {
        match self {
            SensorId::DissolvedO2 => (0.0, 100.0),
            SensorId::Ph => (0.0, 14.0),
            SensorId::Conductivity => (1.0, 100_000.0),
            SensorId::Temperature => (0.0, 30.0),
            SensorId::Pressure => (0.0, PressureBar::BURST.0),
            SensorId::SpecificGravity => super::SG_RANGE,
        }
    }

    pub fn in_range(self, value: f64) -> bool {
        let (lo, hi) = self.valid_range();
        value.is_finite() && value >= lo && value <= hi
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per chamber sensor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorPanel {
    /// mg/L
    pub dissolved_o2: f64,
    pub ph: f64,
    /// µS/cm
    pub conductivity: f64,
    /// °C
    pub temperature: f64,
    pub pressure: PressureBar,
}

impl SensorPanel {
    pub fn get(&self, sensor: SensorId) -> Option<f64> {
        Some(match sensor {
            SensorId::DissolvedO2 => self.dissolved_o2,
            SensorId::Ph => self.ph,
            SensorId::Conductivity => self.conductivity,
            SensorId::Temperature => self.temperature,
            SensorId::Pressure => self.pressure.0,
            SensorId::SpecificGravity => return None,
        })
    }

    /// Sets a chamber field. Hydrometer values are ignored.
    pub fn set(&mut self, sensor: SensorId, value: f64) {
        match sensor {
            SensorId::DissolvedO2 => self.dissolved_o2 = value,
            SensorId::Ph => self.ph = value,
            SensorId::Conductivity => self.conductivity = value,
            SensorId::Temperature => self.temperature = value,
            SensorId::Pressure => self.pressure = PressureBar(value),
            SensorId::SpecificGravity => {}
        }
    }
}

/// Per-field validity flags for a [`SensorPanel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelValidity {
    pub dissolved_o2: bool,
    pub ph: bool,
    pub conductivity: bool,
    pub temperature: bool,
    pub pressure: bool,
}

impl PanelValidity {
    pub const ALL_VALID: PanelValidity = PanelValidity {
        dissolved_o2: true,
        ph: true,
        conductivity: true,
        temperature: true,
        pressure: true,
    };

    pub fn get(&self, sensor: SensorId) -> bool {
        match sensor {
            SensorId::DissolvedO2 => self.dissolved_o2,
            SensorId::Ph => self.ph,
            SensorId::Conductivity => self.conductivity,
            SensorId::Temperature => self.temperature,
            SensorId::Pressure => self.pressure,
            SensorId::SpecificGravity => true,
        }
    }

    pub fn set(&mut self, sensor: SensorId, ok: bool) {
        match sensor {
            SensorId::DissolvedO2 => self.dissolved_o2 = ok,
            SensorId::Ph => self.ph = ok,
            SensorId::Conductivity => self.conductivity = ok,
            SensorId::Temperature => self.temperature = ok,
            SensorId::Pressure => self.pressure = ok,
            SensorId::SpecificGravity => {}
        }
    }

    pub fn all(&self) -> bool {
        SensorId::CHAMBER.iter().all(|s| self.get(*s))
    }

    /// Logical AND, field by field.
    pub fn and(self, other: PanelValidity) -> PanelValidity {
        let mut out = self;
        for s in SensorId::CHAMBER {
            out.set(s, self.get(s) && other.get(s));
        }
        out
    }
}

impl Default for PanelValidity {
    fn default() -> Self {
        Self::ALL_VALID
    }
}

/// Flags every field that falls outside its sensor's declared range.
pub fn range_validate(panel: &SensorPanel) -> PanelValidity {
    let mut flags = PanelValidity::ALL_VALID;
    for sensor in SensorId::CHAMBER {
        let value = panel.get(sensor).unwrap_or(f64::NAN);
        flags.set(sensor, sensor.in_range(value));
    }
    flags
}
