use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FaultKind;
use crate::domain::PressureBar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValveId {
    InletFwd,
    InletRev,
    OutletFwd,
    OutletRev,
    N2Inject,
    Vent,
}

impl ValveId {
    pub const ALL: [ValveId; 6] = [
        ValveId::InletFwd,
        ValveId::InletRev,
        ValveId::OutletFwd,
        ValveId::OutletRev,
        ValveId::N2Inject,
        ValveId::Vent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValveId::InletFwd => "inlet_fwd",
            ValveId::InletRev => "inlet_rev",
            ValveId::OutletFwd => "outlet_fwd",
            ValveId::OutletRev => "outlet_rev",
            ValveId::N2Inject => "n2_inject",
            ValveId::Vent => "vent",
        }
    }

    /// De-energized position: every valve closes except the vent.
    pub fn fail_safe(self) -> ValvePosition {
        match self {
            ValveId::Vent => ValvePosition::Open,
            _ => ValvePosition::Closed,
        }
    }
}

impl fmt::Display for ValveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValveId {
    type Err = super::PlantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValveId::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| super::PlantError::UnknownValve(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValvePosition {
    Open,
    #[default]
    Closed,
}

impl ValvePosition {
    pub fn is_open(self) -> bool {
        self == ValvePosition::Open
    }
}

/// One position per valve. Serializes as a map keyed by valve id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValveBank {
    pub inlet_fwd: ValvePosition,
    pub inlet_rev: ValvePosition,
    pub outlet_fwd: ValvePosition,
    pub outlet_rev: ValvePosition,
    pub n2_inject: ValvePosition,
    pub vent: ValvePosition,
}

impl ValveBank {
    pub fn all_closed() -> Self {
        Self::default()
    }

    /// Vent open, everything else closed.
    pub fn safe() -> Self {
        Self {
            vent: ValvePosition::Open,
            ..Self::default()
        }
    }

    pub fn get(&self, valve: ValveId) -> ValvePosition {
        match valve {
            ValveId::InletFwd => self.inlet_fwd,
            ValveId::InletRev => self.inlet_rev,
            ValveId::OutletFwd => self.outlet_fwd,
            ValveId::OutletRev => self.outlet_rev,
            ValveId::N2Inject => self.n2_inject,
            ValveId::Vent => self.vent,
        }
    }

    pub fn set(&mut self, valve: ValveId, position: ValvePosition) {
        let slot = match valve {
            ValveId::InletFwd => &mut self.inlet_fwd,
            ValveId::InletRev => &mut self.inlet_rev,
            ValveId::OutletFwd => &mut self.outlet_fwd,
            ValveId::OutletRev => &mut self.outlet_rev,
            ValveId::N2Inject => &mut self.n2_inject,
            ValveId::Vent => &mut self.vent,
        };
        *slot = position;
    }

    pub fn with(mut self, valve: ValveId, position: ValvePosition) -> Self {
        self.set(valve, position);
        self
    }

    pub fn is_open(&self, valve: ValveId) -> bool {
        self.get(valve).is_open()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ValveId, ValvePosition)> + '_ {
        ValveId::ALL.into_iter().map(|v| (v, self.get(v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Microseconds of simulated time since the scenario started.
    pub sim_time_us: u64,
    pub tank_sg: f64,
    /// °C
    pub tank_temp: f64,
    /// liters
    pub tank_volume: f64,
    pub chamber_pressure: PressureBar,
    pub chamber_filled: bool,
    /// liters
    pub chamber_sample_volume: f64,
    /// Commanded positions. See [`super::PlantSim::effective_position`].
    pub valve_states: ValveBank,
    pub relief_valve_open: bool,
    #[serde(default)]
    pub active_faults: Vec<FaultKind>,
}

impl PlantState {
    pub fn sim_time_ms(&self) -> u64 {
        self.sim_time_us / 1000
    }

    pub fn sim_hours(&self) -> f64 {
        self.sim_time_us as f64 / 3.6e9
    }

    pub fn has_fault(&self, fault: &FaultKind) -> bool {
        self.active_faults.iter().any(|f| f == fault)
    }

    pub fn power_lost(&self) -> bool {
        self.has_fault(&FaultKind::PowerLoss)
    }

    pub fn network_partitioned(&self) -> bool {
        self.has_fault(&FaultKind::NetworkPartition)
    }

    /// Liquid in tank plus chamber.
    pub fn total_liquid(&self) -> f64 {
        self.tank_volume + self.chamber_sample_volume
    }
}
