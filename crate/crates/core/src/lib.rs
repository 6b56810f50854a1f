//! Hardware-free digital twin of a pressurized fermentation sampling rig.
//!
//! The crate is split along the runtime boundaries of the real system:
//!
//! * [`domain`]: value types shared by every component (panels, records,
//!   commands, batch configuration) plus the canonical JSON codec.
//! * [`plant`]: discrete-time physics of the tank, sampling chamber, valves,
//!   nitrogen supply and sensors, with a fault-injection surface.
//! * [`controller`]: the device-side software. Sampling state machine,
//!   safety interlocks, watchdog, heartbeats, calibration and the measurement
//!   sequence.
//! * [`protocol`]: newline-delimited JSON frames and the links that carry them.
//! * [`server`]: ingestion, pub-sub, time-series store, analysis, safety
//!   monitoring and the authorization-gated control service.
//! * [`scenario`]: the harness that wires everything together for
//!   deterministic runs, endurance tests, fault campaigns and exports.

pub mod controller;
pub mod domain;
pub mod plant;
pub mod protocol;
pub mod scenario;
pub mod server;

pub use domain::{
    BatchConfig, BatchId, CommandEnvelope, CommandKind, FlowDirection, MeasurementRecord,
    PressureBar, SafetyLevel, SensorId, SensorPanel,
};
