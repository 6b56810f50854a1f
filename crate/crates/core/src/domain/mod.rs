//! Shared vocabulary: units, sensor panels, records, commands and batch
//! configuration.

pub mod codec;
mod command;
mod config;
mod panel;
mod record;
mod units;

pub use command::{
    CommandEnvelope, CommandId, CommandKind, Confirmation, Origin, SafetyLevel,
};
pub use config::{
    validate_config, BatchConfig, BatchId, ConfigError, ValidatedConfig, MAX_SAMPLING_INTERVAL,
    MIN_SAMPLING_INTERVAL,
};
pub use panel::{range_validate, PanelValidity, SensorId, SensorPanel};
pub use record::{FlowDirection, HydrometerReading, MeasurementRecord};
pub use units::{duration_ms, gravity_points, sg_from_points, MonotonicMs, PressureBar, WallMs};

/// Valid specific-gravity span for hydrometer readings.
pub const SG_RANGE: (f64, f64) = (0.990, 1.120);
