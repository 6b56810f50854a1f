//! Deterministic end-to-end runs: scenario files, the closed-loop harness,
//! endurance runs, parallel campaigns and exports.

mod campaign;
mod export;
mod harness;
mod library;
mod model;
mod rig;

pub use campaign::{endurance, endurance_scenario, run_campaign, Execution};
pub use export::{export_run, metric_csv, points_csv, read_points_csv, report_json, ExportError};
pub use harness::{
    latency_histogram, CycleEntry, CycleStats, DeliveryCheck, DirectionSwitch, LatencyBin, PointKey,
    RunReport, SafetyEpisode, Speed, SystemSim, TransitionEntry, Violation, ViolationKind,
    LATENCY_BINS_MS, RELIEF_OVERSHOOT,
};
pub use library::{bundled, bundled_named, BUNDLED_NAMES};
pub use rig::Rig;
pub use model::{Action, Scenario, ScenarioError, ScheduledEvent, DEFAULT_EPOCH_MS, DEFAULT_SEED};
