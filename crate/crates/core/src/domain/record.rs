use serde::{Deserialize, Serialize};

use super::{BatchId, MonotonicMs, PanelValidity, SensorPanel, WallMs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    #[default]
    Forward,
    Reverse,
}

impl FlowDirection {
    pub fn flipped(self) -> Self {
        match self {
            FlowDirection::Forward => FlowDirection::Reverse,
            FlowDirection::Reverse => FlowDirection::Forward,
        }
    }
}

/// A reading from the floating hydrometer in the tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydrometerReading {
    pub specific_gravity: f64,
    /// °C
    pub temperature: f64,
    pub controller_timestamp: MonotonicMs,
    /// Filled by the server on ingestion.
    #[serde(default)]
    pub server_timestamp: Option<WallMs>,
}

impl HydrometerReading {
    pub fn in_range(&self) -> bool {
        crate::domain::SensorId::SpecificGravity.in_range(self.specific_gravity)
    }
}

/// Compensated, CI-qualified panel snapshot from one sampling cycle.
///
/// `panel_ci_halfwidth` holds the half-width of the 95% confidence interval of
/// each mean, in the same unit. Fields whose sensor was unavailable carry a
/// mean and half-width of zero and a cleared validity flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub batch_id: BatchId,
    pub cycle_index: u64,
    pub flow_direction: FlowDirection,
    pub panel_mean: SensorPanel,
    pub panel_ci_halfwidth: SensorPanel,
    pub sample_count: u32,
    pub valid: bool,
    pub validity: PanelValidity,
    pub controller_timestamp: MonotonicMs,
    #[serde(default)]
    pub server_timestamp: Option<WallMs>,
}

impl MeasurementRecord {
    /// Checks the structural invariants of a record.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.sample_count < 2 {
            return Err(format!("sample_count {} < 2", self.sample_count));
        }
        for sensor in crate::domain::SensorId::CHAMBER {
            let hw = self.panel_ci_halfwidth.get(sensor).unwrap_or(0.0);
            if !(hw >= 0.0) {
                return Err(format!("negative CI half-width for {sensor}"));
            }
        }
        let ranges = crate::domain::range_validate(&self.panel_mean);
        if self.valid && !ranges.all() {
            return Err("record marked valid with an out-of-range mean".into());
        }
        if self.valid != self.validity.all() {
            return Err("valid flag disagrees with per-field flags".into());
        }
        Ok(())
    }
}
