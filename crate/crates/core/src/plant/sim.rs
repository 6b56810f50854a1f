use std::time::Duration;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sensors::accuracy;
use super::{FaultKind, FermentationModel, PlantState, SensorBiases, ValveBank, ValveId, ValvePosition};
use crate::domain::{HydrometerReading, PressureBar, SensorId};

/// Simulation tick used by the harness.
pub const SIM_TICK: Duration = Duration::from_millis(100);
/// Longest single integration step accepted by [`PlantSim::step`].
pub const MAX_STEP: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("step duration must be positive")]
    NonPositiveDt,
    #[error("step duration {0:?} exceeds 1 s")]
    DtTooLarge(Duration),
    #[error("unknown valve {0:?}")]
    UnknownValve(String),
    #[error("sensor {0} unavailable")]
    SensorUnavailable(SensorId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    pub fermentation: FermentationModel,
    /// Hours of fermentation already elapsed when the simulation starts.
    pub fermentation_elapsed_h: f64,
    /// bar/s while n2_inject is open
    pub k_in: f64,
    /// bar/s while the vent is open
    pub k_out: f64,
    pub supply_pressure: PressureBar,
    pub relief_threshold: PressureBar,
    /// liters
    pub chamber_capacity: f64,
    /// liters/second through an open inlet or outlet path
    pub transfer_rate: f64,
    /// Multiplier on every sensor's noise sigma. 0 gives noiseless readings.
    pub noise_scale: f64,
    pub biases: SensorBiases,
    /// °C, hydrometer temperature probe
    pub hydrometer_temp_sigma: f64,
    pub initial_tank_volume: f64,
    pub initial_tank_temp: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            fermentation: FermentationModel::default(),
            fermentation_elapsed_h: 0.0,
            k_in: 0.5,
            k_out: 0.25,
            supply_pressure: PressureBar(12.0),
            relief_threshold: PressureBar(10.0),
            chamber_capacity: 0.5,
            transfer_rate: 0.1,
            noise_scale: 1.0,
            biases: SensorBiases::default(),
            hydrometer_temp_sigma: 0.1,
            initial_tank_volume: 20.0,
            initial_tank_temp: 18.0,
        }
    }
}

/// The plant's physics. Stateless apart from its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSim {
    params: PlantParams,
}

impl PlantSim {
    pub fn new(params: PlantParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn initial_state(&self) -> PlantState {
        PlantState {
            sim_time_us: 0,
            tank_sg: self.params.fermentation.sg_at(self.params.fermentation_elapsed_h),
            tank_temp: self.params.initial_tank_temp,
            tank_volume: self.params.initial_tank_volume,
            chamber_pressure: PressureBar::ATMOSPHERIC,
            chamber_filled: false,
            chamber_sample_volume: 0.0,
            valve_states: ValveBank::all_closed(),
            relief_valve_open: false,
            active_faults: Vec::new(),
        }
    }

    /// Position the valve actually takes. A stuck fault wins over everything,
    /// then power loss forces the de-energized table, otherwise the commanded
    /// position holds.
    pub fn effective_position(&self, state: &PlantState, valve: ValveId) -> ValvePosition {
        for fault in &state.active_faults {
            match *fault {
                FaultKind::ValveStuckClosed { valve: v } if v == valve => return ValvePosition::Closed,
                FaultKind::ValveStuckOpen { valve: v } if v == valve => return ValvePosition::Open,
                _ => {}
            }
        }
        if state.power_lost() {
            return valve.fail_safe();
        }
        state.valve_states.get(valve)
    }

    pub fn effective_valves(&self, state: &PlantState) -> ValveBank {
        let mut bank = ValveBank::all_closed();
        for v in ValveId::ALL {
            bank.set(v, self.effective_position(state, v));
        }
        bank
    }

    pub fn step(&self, state: &PlantState, dt: Duration) -> Result<PlantState, PlantError> {
        let mut next = state.clone();
        self.step_in_place(&mut next, dt)?;
        Ok(next)
    }

    /// In-place variant of [`PlantSim::step`] for the hot simulation loop.
    pub fn step_in_place(&self, state: &mut PlantState, dt: Duration) -> Result<(), PlantError> {
        if dt.is_zero() {
            return Err(PlantError::NonPositiveDt);
        }
        if dt > MAX_STEP {
            return Err(PlantError::DtTooLarge(dt));
        }
        let p = &self.params;
        let secs = dt.as_secs_f64();
        let valves = self.effective_valves(state);

        state.sim_time_us += dt.as_micros() as u64;
        state.tank_sg = p
            .fermentation
            .sg_at(p.fermentation_elapsed_h + state.sim_hours());

        let mut pressure = state.chamber_pressure.0;
        if valves.n2_inject.is_open() && pressure < p.supply_pressure.0 {
            pressure = (pressure + p.k_in * secs).min(p.supply_pressure.0);
        }
        if valves.vent.is_open() {
            pressure = (pressure - p.k_out * secs).max(0.0);
        }
        // Mechanical relief: unconditional, not reachable from software.
        if pressure >= p.relief_threshold.0 {
            pressure = p.relief_threshold.0;
            state.relief_valve_open = true;
        } else {
            state.relief_valve_open = false;
        }
        state.chamber_pressure = PressureBar(pressure.min(PressureBar::BURST.0));

        let filling = valves.inlet_fwd.is_open() || valves.inlet_rev.is_open();
        let draining = valves.outlet_fwd.is_open() || valves.outlet_rev.is_open();
        let nominal = p.transfer_rate * secs;
        match (filling, draining) {
            (true, false) => {
                let room = p.chamber_capacity - state.chamber_sample_volume;
                let moved = nominal.min(room).min(state.tank_volume).max(0.0);
                state.tank_volume -= moved;
                state.chamber_sample_volume += moved;
            }
            (false, true) => {
                let moved = nominal.min(state.chamber_sample_volume).max(0.0);
                state.tank_volume += moved;
                state.chamber_sample_volume -= moved;
            }
            // Both paths open: liquid passes straight through.
            _ => {}
        }
        state.chamber_filled = state.chamber_sample_volume >= p.chamber_capacity - 1e-9;
        Ok(())
    }

    /// Records a commanded valve position. The effective position may differ
    /// while a stuck-valve fault or power loss is active.
    pub fn actuate(&self, state: &PlantState, valve: ValveId, position: ValvePosition) -> PlantState {
        let mut next = state.clone();
        next.valve_states.set(valve, position);
        next
    }

    pub fn actuate_named(
        &self,
        state: &PlantState,
        valve: &str,
        position: ValvePosition,
    ) -> Result<PlantState, PlantError> {
        Ok(self.actuate(state, valve.parse()?, position))
    }

    pub fn inject_fault(&self, state: &PlantState, fault: FaultKind) -> PlantState {
        let mut next = state.clone();
        next.active_faults.retain(|f| !f.same_slot(&fault));
        next.active_faults.push(fault);
        next
    }

    /// Removes the fault occupying the same slot as `fault`.
    pub fn clear_fault(&self, state: &PlantState, fault: FaultKind) -> PlantState {
        let mut next = state.clone();
        next.active_faults.retain(|f| !f.same_slot(&fault));
        next
    }

    /// Ground-truth value of a sensor's measurand.
    pub fn truth(&self, state: &PlantState, sensor: SensorId) -> f64 {
        let progress = {
            let m = &self.params.fermentation;
            ((m.og - state.tank_sg) / (m.og - m.fg)).clamp(0.0, 1.0)
        };
        match sensor {
            SensorId::DissolvedO2 => 0.3 + 7.7 * (1.0 - progress),
            SensorId::Ph => 5.3 - 1.0 * progress,
            SensorId::Conductivity => 1800.0 - 400.0 * progress,
            SensorId::Temperature => state.tank_temp,
            SensorId::Pressure => state.chamber_pressure.0,
            SensorId::SpecificGravity => state.tank_sg,
        }
    }

    fn drift(state: &PlantState, sensor: SensorId) -> f64 {
        state
            .active_faults
            .iter()
            .filter_map(|f| match *f {
                FaultKind::SensorDrift { sensor: s, offset } if s == sensor => Some(offset),
                _ => None,
            })
            .sum()
    }

    fn available(state: &PlantState, sensor: SensorId) -> Result<(), PlantError> {
        let failed = state.active_faults.iter().any(|f| {
            matches!(*f, FaultKind::SensorFailure { sensor: s } if s == sensor)
        });
        if failed || state.power_lost() {
            Err(PlantError::SensorUnavailable(sensor))
        } else {
            Ok(())
        }
    }

    /// Raw reading for a given standard-normal draw `z`.
    pub fn raw_reading(&self, state: &PlantState, sensor: SensorId, z: f64) -> Result<f64, PlantError> {
        Self::available(state, sensor)?;
        let truth = self.truth(state, sensor);
        let noise = self.params.noise_scale * accuracy(sensor) * z;
        let bias = self.params.biases.get(sensor).at(state.chamber_pressure.0);
        Ok(truth + noise + bias + Self::drift(state, sensor))
    }

    /// Truth plus Gaussian noise at the sensor's rated accuracy, plus the
    /// pressure bias and any injected drift.
    pub fn read_sensor<R: Rng + ?Sized>(
        &self,
        state: &PlantState,
        sensor: SensorId,
        rng: &mut R,
    ) -> Result<f64, PlantError> {
        let z: f64 = rng.sample(StandardNormal);
        self.raw_reading(state, sensor, z)
    }

    /// Level switch at the top of the chamber.
    pub fn chamber_full_switch(&self, state: &PlantState) -> bool {
        state.chamber_filled
    }

    /// Level switch at the bottom of the chamber.
    pub fn chamber_empty_switch(&self, state: &PlantState) -> bool {
        state.chamber_sample_volume <= 1e-9
    }

    pub fn read_hydrometer<R: Rng + ?Sized>(
        &self,
        state: &PlantState,
        controller_timestamp: u64,
        rng: &mut R,
    ) -> Result<HydrometerReading, PlantError> {
        let z_sg: f64 = rng.sample(StandardNormal);
        let z_t: f64 = rng.sample(StandardNormal);
        let sg = self.raw_reading(state, SensorId::SpecificGravity, z_sg)?;
        Ok(HydrometerReading {
            specific_gravity: sg,
            temperature: state.tank_temp + self.params.noise_scale * self.params.hydrometer_temp_sigma * z_t,
            controller_timestamp,
            server_timestamp: None,
        })
    }
}
