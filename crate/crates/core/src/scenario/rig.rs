//! The physical rig as the controller sees it: plant, sensors, valves and
//! the controller itself, powered or not.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{Controller, ControllerConfig, Hal, Persisted, SensorUnavailable, TickReport, VentSchedule};
use crate::domain::{CommandId, CommandKind, MonotonicMs, SensorId};
use crate::plant::{FaultKind, PlantParams, PlantSim, PlantState, ValveBank, ValveId, ValvePosition};
use crate::protocol::{DownFrame, Frame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct VentPulse {
    schedule: VentSchedule,
    started_us: u64,
}

impl VentPulse {
    pub(crate) fn is_open(&self, t_us: u64) -> bool {
        let phase = (t_us - self.started_us) % self.schedule.period_us;
        phase < self.schedule.open_us
    }

    /// Next pulse edge strictly after `t_us`.
    pub(crate) fn next_edge(&self, t_us: u64) -> Option<u64> {
        let s = self.schedule;
        if s.open_us == 0 || s.open_us >= s.period_us {
            return None;
        }
        let phase = (t_us - self.started_us) % s.period_us;
        Some(if phase < s.open_us {
            t_us + s.open_us - phase
        } else {
            t_us + s.period_us - phase
        })
    }
}

struct PlantHal<'a> {
    sim: &'a PlantSim,
    state: &'a mut PlantState,
    rng: &'a mut ChaCha8Rng,
    vent: &'a mut Option<VentPulse>,
    now_us: u64,
}

impl Hal for PlantHal<'_> {
    fn read(&mut self, sensor: SensorId) -> Result<f64, SensorUnavailable> {
        self.sim
            .read_sensor(self.state, sensor, self.rng)
            .map_err(|_| SensorUnavailable(sensor))
    }

    fn read_hydrometer(&mut self) -> Result<(f64, f64), SensorUnavailable> {
        self.sim
            .read_hydrometer(self.state, 0, self.rng)
            .map(|r| (r.specific_gravity, r.temperature))
            .map_err(|_| SensorUnavailable(SensorId::SpecificGravity))
    }

    fn chamber_full(&mut self) -> bool {
        self.sim.chamber_full_switch(self.state)
    }

    fn chamber_empty(&mut self) -> bool {
        self.sim.chamber_empty_switch(self.state)
    }

    fn set_valves(&mut self, valves: ValveBank) {
        self.state.valve_states = valves;
        *self.vent = None;
    }

    fn pulse_vent(&mut self, schedule: VentSchedule) {
        self.state.valve_states.vent = ValvePosition::Open;
        *self.vent = Some(VentPulse {
            schedule,
            started_us: self.now_us,
        });
    }
}

fn fail_safe_bank() -> ValveBank {
    let mut bank = ValveBank::all_closed();
    for v in ValveId::ALL {
        bank.set(v, v.fail_safe());
    }
    bank
}

/// Plant plus controller on a microsecond clock. The controller's monotonic
/// clock restarts at zero on every boot.
pub struct Rig {
    plant: PlantSim,
    state: PlantState,
    rng: ChaCha8Rng,
    vent: Option<VentPulse>,
    cfg: ControllerConfig,
    controller: Option<Controller>,
    persisted: Option<Persisted>,
    boot_id: u32,
    boot_time_us: u64,
}

impl Rig {
    pub fn new(plant: PlantParams, cfg: ControllerConfig, seed: u64) -> Self {
        let plant = PlantSim::new(plant);
        let state = plant.initial_state();
        Self {
            controller: Some(Controller::new(cfg.clone())),
            plant,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            vent: None,
            cfg,
            persisted: None,
            boot_id: 0,
            boot_time_us: 0,
        }
    }

    pub fn plant(&self) -> &PlantSim {
        &self.plant
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn controller(&self) -> Option<&Controller> {
        self.controller.as_ref()
    }

    pub fn boot_id(&self) -> u32 {
        self.boot_id
    }

    /// Controller clock at simulated time `t_us`.
    pub fn controller_time(&self, t_us: u64) -> MonotonicMs {
        t_us.saturating_sub(self.boot_time_us) / 1000
    }

    /// Injects a fault. Power loss halts the controller, keeping only what it
    /// persists, and drops every valve to its de-energized position.
    pub fn inject(&mut self, fault: FaultKind) {
        self.state = self.plant.inject_fault(&self.state, fault);
        if fault == FaultKind::PowerLoss {
            if let Some(ctrl) = self.controller.take() {
                self.persisted = Some(ctrl.persisted());
            }
            self.vent = None;
            self.state.valve_states = fail_safe_bank();
        }
    }

    /// Clears a fault. Restored power reboots the controller. Returns true on
    /// a reboot.
    pub fn clear(&mut self, fault: FaultKind, now_us: u64) -> bool {
        self.state = self.plant.clear_fault(&self.state, fault);
        if fault != FaultKind::PowerLoss || self.controller.is_some() {
            return false;
        }
        self.boot_id += 1;
        self.boot_time_us = now_us;
        let persisted = self.persisted.take().expect("persisted at power loss");
        self.controller = Some(Controller::reboot(self.cfg.clone(), self.boot_id, persisted));
        true
    }

    /// Hands a downlink frame to the controller. Lost while unpowered.
    pub fn receive(&mut self, frame: DownFrame, t_us: u64) {
        let at = self.controller_time(t_us);
        if let Some(ctrl) = self.controller.as_mut() {
            ctrl.receive(frame, at);
        }
    }

    fn with_hal<R>(&mut self, now_us: u64, f: impl FnOnce(&mut Controller, MonotonicMs, &mut dyn Hal) -> R) -> Option<R> {
        let t = self.controller_time(now_us);
        let ctrl = self.controller.as_mut()?;
        let mut hal = PlantHal {
            sim: &self.plant,
            state: &mut self.state,
            rng: &mut self.rng,
            vent: &mut self.vent,
            now_us,
        };
        Some(f(ctrl, t, &mut hal))
    }

    pub fn tick(&mut self, now_us: u64) -> Option<TickReport> {
        self.with_hal(now_us, |c, t, hal| c.tick(t, hal))
    }

    pub fn transmit(&mut self, now_us: u64) -> Vec<Frame> {
        let t = self.controller_time(now_us);
        self.controller.as_mut().map(|c| c.transmit(t)).unwrap_or_default()
    }

    pub fn console_command(&mut self, kind: CommandKind, now_us: u64) -> Option<CommandId> {
        self.with_hal(now_us, |c, t, hal| c.console_command(kind, t, hal))
    }

    pub fn console_confirm(&mut self, id: CommandId, kind: CommandKind, now_us: u64) {
        let t = self.controller_time(now_us);
        if let Some(c) = self.controller.as_mut() {
            c.console_confirm(id, kind, t);
        }
    }

    pub fn console_ack_alert(&mut self, alert_id: u64, now_us: u64) {
        let t = self.controller_time(now_us);
        if let Some(c) = self.controller.as_mut() {
            c.console_ack_alert(alert_id, t);
        }
    }

    /// Integrates the plant over `[from_us, to_us)`, splitting at vent pulse
    /// edges.
    pub fn step_plant(&mut self, from_us: u64, to_us: u64) {
        let mut t = from_us;
        while t < to_us {
            let end = match self.vent {
                Some(pulse) => {
                    self.state.valve_states.vent =
                        if pulse.is_open(t) { ValvePosition::Open } else { ValvePosition::Closed };
                    pulse.next_edge(t).map_or(to_us, |e| e.min(to_us))
                }
                None => to_us,
            };
            self.plant
                .step_in_place(&mut self.state, Duration::from_micros(end - t))
                .expect("tick within plant step bounds");
            t = end;
        }
        self.state.sim_time_us = to_us;
    }
}
