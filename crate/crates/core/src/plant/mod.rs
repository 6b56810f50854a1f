//! Discrete-time model of the physical rig: fermentation tank, sampling
//! chamber, six software-controlled valves, nitrogen supply, the mechanical
//! relief valve, and noisy sensors with pressure sensitivity.
//!
//! The plant is a pure state-transition system. [`PlantSim`] holds the
//! physical parameters and every operation maps a [`PlantState`] to a new one,
//! so identical inputs always produce identical states.

mod fault;
mod model;
mod sensors;
mod sim;
mod state;

pub use fault::FaultKind;
pub use model::FermentationModel;
pub use sensors::{SensorBias, SensorBiases};
pub use sim::{PlantError, PlantParams, PlantSim, MAX_STEP, SIM_TICK};
pub use state::{PlantState, ValveBank, ValveId, ValvePosition};
