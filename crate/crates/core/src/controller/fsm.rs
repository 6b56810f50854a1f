//! Sampling cycle state machine with safety interlocks.
//!
//! Normal path: `Idle -> FlowWay1 -> Pressurization -> Sampling ->
//! Depressurization -> FlowWay2 -> Idle`. Every event is first screened
//! against the shutdown threshold and the per-state timeout, so the safety
//! edges to `EmergencyShutdown` and `SafeState` are reachable from every
//! state regardless of the event.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{FlowDirection, PressureBar};
use crate::plant::{ValveBank, ValveId, ValvePosition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingState {
    Idle,
    FlowWay1,
    Pressurization,
    Sampling,
    Depressurization,
    FlowWay2,
    SafeState,
    EmergencyShutdown,
}

impl SamplingState {
    pub const ALL: [SamplingState; 8] = [
        SamplingState::Idle,
        SamplingState::FlowWay1,
        SamplingState::Pressurization,
        SamplingState::Sampling,
        SamplingState::Depressurization,
        SamplingState::FlowWay2,
        SamplingState::SafeState,
        SamplingState::EmergencyShutdown,
    ];

    pub fn is_safety_state(self) -> bool {
        matches!(self, SamplingState::SafeState | SamplingState::EmergencyShutdown)
    }
}

impl fmt::Display for SamplingState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SamplingState::Idle => "idle",
            SamplingState::FlowWay1 => "flow_way1",
            SamplingState::Pressurization => "pressurization",
            SamplingState::Sampling => "sampling",
            SamplingState::Depressurization => "depressurization",
            SamplingState::FlowWay2 => "flow_way2",
            SamplingState::SafeState => "safe_state",
            SamplingState::EmergencyShutdown => "emergency_shutdown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsmEvent {
    HydrometerTrigger,
    ChamberFull,
    PressureReached,
    MeasurementsDone,
    PressureReleased,
    SampleReturned,
    Tick,
    /// Leave Pressurization/Sampling early (pressure out of band, manual
    /// depressurize).
    Abort,
    WatchdogExpired,
    EmergencyStop,
    CommsRestored,
    /// Operator reset of a latched shutdown or a safe state.
    ShutdownReset,
}

impl FsmEvent {
    pub const ALL: [FsmEvent; 12] = [
        FsmEvent::HydrometerTrigger,
        FsmEvent::ChamberFull,
        FsmEvent::PressureReached,
        FsmEvent::MeasurementsDone,
        FsmEvent::PressureReleased,
        FsmEvent::SampleReturned,
        FsmEvent::Tick,
        FsmEvent::Abort,
        FsmEvent::WatchdogExpired,
        FsmEvent::EmergencyStop,
        FsmEvent::CommsRestored,
        FsmEvent::ShutdownReset,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionReason {
    Normal,
    Overpressure,
    Timeout,
    WatchdogExpired,
    EmergencyStop,
    Aborted,
    Recovered,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FsmError {
    #[error("event {event:?} is not valid in state {state}")]
    IllegalEvent { state: SamplingState, event: FsmEvent },
    #[error("reset refused: pressure {0} still above shutdown threshold")]
    ResetWhileOverpressure(PressureBar),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleCounter {
    pub cycles_completed_in_direction: u32,
    pub flow_direction: FlowDirection,
}

impl Default for CycleCounter {
    fn default() -> Self {
        Self {
            cycles_completed_in_direction: 0,
            flow_direction: FlowDirection::Forward,
        }
    }
}

impl CycleCounter {
    /// Counts a completed cycle. Returns true when the direction flipped.
    pub fn complete_cycle(&mut self, cycles_per_direction: u32) -> bool {
        self.cycles_completed_in_direction += 1;
        if self.cycles_completed_in_direction >= cycles_per_direction.max(1) {
            self.cycles_completed_in_direction = 0;
            self.flow_direction = self.flow_direction.flipped();
            true
        } else {
            false
        }
    }
}

/// Per-state time limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StateTimeouts {
    #[serde(with = "crate::domain::duration_ms", rename = "flow_way1_ms")]
    pub fill: Duration,
    #[serde(with = "crate::domain::duration_ms", rename = "pressurization_ms")]
    pub pressurize: Duration,
    #[serde(with = "crate::domain::duration_ms", rename = "sampling_ms")]
    pub sampling: Duration,
    #[serde(with = "crate::domain::duration_ms", rename = "depressurization_ms")]
    pub depressurize: Duration,
    #[serde(with = "crate::domain::duration_ms", rename = "flow_way2_ms")]
    pub ret: Duration,
}

impl Default for StateTimeouts {
    fn default() -> Self {
        Self {
            fill: Duration::from_secs(60),
            pressurize: Duration::from_secs(60),
            sampling: Duration::from_secs(90),
            depressurize: Duration::from_secs(120),
            ret: Duration::from_secs(60),
        }
    }
}

impl StateTimeouts {
    pub fn for_state(&self, state: SamplingState) -> Option<Duration> {
        match state {
            SamplingState::FlowWay1 => Some(self.fill),
            SamplingState::Pressurization => Some(self.pressurize),
            SamplingState::Sampling => Some(self.sampling),
            SamplingState::Depressurization => Some(self.depressurize),
            SamplingState::FlowWay2 => Some(self.ret),
            _ => None,
        }
    }
}

/// What the valves should do on entering a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ValveCommand {
    Set { valves: ValveBank },
    /// Everything closed, vent pulsed by the depressurization schedule.
    VentDutyCycle,
}

impl ValveCommand {
    pub fn for_state(state: SamplingState, direction: FlowDirection) -> ValveCommand {
        let (inlet, outlet) = match direction {
            FlowDirection::Forward => (ValveId::InletFwd, ValveId::OutletFwd),
            FlowDirection::Reverse => (ValveId::InletRev, ValveId::OutletRev),
        };
        let closed = ValveBank::all_closed();
        let valves = match state {
            SamplingState::Idle | SamplingState::Sampling => closed,
            // The vent lets displaced gas out while liquid moves.
            SamplingState::FlowWay1 => closed
                .with(inlet, ValvePosition::Open)
                .with(ValveId::Vent, ValvePosition::Open),
            SamplingState::Pressurization => closed.with(ValveId::N2Inject, ValvePosition::Open),
            SamplingState::Depressurization => return ValveCommand::VentDutyCycle,
            SamplingState::FlowWay2 => closed
                .with(outlet, ValvePosition::Open)
                .with(ValveId::Vent, ValvePosition::Open),
            SamplingState::SafeState | SamplingState::EmergencyShutdown => ValveBank::safe(),
        };
        ValveCommand::Set { valves }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsmInput {
    pub pressure: PressureBar,
    pub elapsed_in_state: Duration,
    /// The chamber was filled during the current cycle. Only such cycles
    /// count toward the direction switch; recovery passes with an untouched
    /// chamber do not.
    pub chamber_used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsmLimits {
    pub shutdown_threshold: PressureBar,
    pub timeouts: StateTimeouts,
    pub cycles_per_direction: u32,
}

/// Result of feeding one event to the machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsmStep {
    pub from: SamplingState,
    pub to: SamplingState,
    pub counter: CycleCounter,
    pub reason: TransitionReason,
    /// Present only when the state changed.
    pub valves: Option<ValveCommand>,
    pub cycle_completed: bool,
    pub direction_flipped: bool,
}

impl FsmStep {
    pub fn changed(&self) -> bool {
        self.from != self.to
    }
}

/// Pure transition function.
pub fn fsm_transition(
    state: SamplingState,
    counter: CycleCounter,
    event: FsmEvent,
    input: FsmInput,
    limits: &FsmLimits,
) -> Result<FsmStep, FsmError> {
    use FsmEvent as E;
    use SamplingState as S;

    let step = |to: S, reason: TransitionReason| -> FsmStep {
        let mut counter = counter;
        let mut cycle_completed = false;
        let mut direction_flipped = false;
        if state == S::FlowWay2 && to == S::Idle && input.chamber_used {
            cycle_completed = true;
            direction_flipped = counter.complete_cycle(limits.cycles_per_direction);
        }
        FsmStep {
            from: state,
            to,
            counter,
            reason,
            valves: (to != state).then(|| ValveCommand::for_state(to, counter.flow_direction)),
            cycle_completed,
            direction_flipped,
        }
    };

    // Interlocks come before the event itself.
    if state != S::EmergencyShutdown && input.pressure.0 > limits.shutdown_threshold.0 {
        return Ok(step(S::EmergencyShutdown, TransitionReason::Overpressure));
    }
    if event == E::EmergencyStop {
        return Ok(step(S::EmergencyShutdown, TransitionReason::EmergencyStop));
    }
    if let Some(limit) = limits.timeouts.for_state(state) {
        if input.elapsed_in_state > limit {
            return Ok(step(S::SafeState, TransitionReason::Timeout));
        }
    }
    if event == E::WatchdogExpired {
        return Ok(match state {
            S::EmergencyShutdown | S::SafeState => step(state, TransitionReason::WatchdogExpired),
            _ => step(S::SafeState, TransitionReason::WatchdogExpired),
        });
    }

    if event == E::ShutdownReset && input.pressure.0 > limits.shutdown_threshold.0 {
        return Err(FsmError::ResetWhileOverpressure(input.pressure));
    }

    let next = match (state, event) {
        (_, E::Tick) => return Ok(step(state, TransitionReason::Normal)),
        (S::Idle, E::HydrometerTrigger) => (S::FlowWay1, TransitionReason::Normal),
        (S::FlowWay1, E::ChamberFull) => (S::Pressurization, TransitionReason::Normal),
        (S::Pressurization, E::PressureReached) => (S::Sampling, TransitionReason::Normal),
        (S::Sampling, E::MeasurementsDone) => (S::Depressurization, TransitionReason::Normal),
        (S::FlowWay1 | S::Pressurization | S::Sampling, E::Abort) => {
            (S::Depressurization, TransitionReason::Aborted)
        }
        (S::Depressurization, E::PressureReleased) => (S::FlowWay2, TransitionReason::Normal),
        (S::FlowWay2, E::SampleReturned) => (S::Idle, TransitionReason::Normal),
        // Recovery always vents first; an empty chamber passes through
        // FlowWay2 immediately.
        (S::SafeState, E::CommsRestored) => (S::Depressurization, TransitionReason::Recovered),
        (S::SafeState | S::EmergencyShutdown, E::ShutdownReset) => {
            (S::Depressurization, TransitionReason::Reset)
        }
        _ => return Err(FsmError::IllegalEvent { state, event }),
    };
    Ok(step(next.0, next.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limits() -> FsmLimits {
        FsmLimits {
            shutdown_threshold: PressureBar(8.0),
            timeouts: StateTimeouts::default(),
            cycles_per_direction: 5,
        }
    }

    fn input(p: f64) -> FsmInput {
        FsmInput {
            pressure: PressureBar(p),
            elapsed_in_state: Duration::from_secs(1),
            chamber_used: true,
        }
    }

    fn go(state: SamplingState, event: FsmEvent, p: f64) -> Result<FsmStep, FsmError> {
        fsm_transition(state, CycleCounter::default(), event, input(p), &limits())
    }

    #[test]
    fn measurements_done_starts_depressurization() {
        let s = go(SamplingState::Sampling, FsmEvent::MeasurementsDone, 7.0).unwrap();
        assert_eq!(s.to, SamplingState::Depressurization);
        assert_eq!(s.valves, Some(ValveCommand::VentDutyCycle));
    }

    #[test]
    fn overpressure_shuts_down_and_vents() {
        let s = go(SamplingState::Pressurization, FsmEvent::Tick, 8.1).unwrap();
        assert_eq!(s.to, SamplingState::EmergencyShutdown);
        assert_eq!(s.reason, TransitionReason::Overpressure);
        assert_eq!(s.valves, Some(ValveCommand::Set { valves: ValveBank::safe() }));
    }

    #[test]
    fn exactly_at_threshold_is_not_overpressure() {
        let s = go(SamplingState::Sampling, FsmEvent::Tick, 8.0).unwrap();
        assert_eq!(s.to, SamplingState::Sampling);
    }

    #[test]
    fn fifth_return_flips_direction() {
        let counter = CycleCounter {
            cycles_completed_in_direction: 4,
            flow_direction: FlowDirection::Forward,
        };
        let s = fsm_transition(SamplingState::FlowWay2, counter, FsmEvent::SampleReturned, input(0.0), &limits())
            .unwrap();
        assert_eq!(s.to, SamplingState::Idle);
        assert!(s.cycle_completed && s.direction_flipped);
        assert_eq!(s.counter.flow_direction, FlowDirection::Reverse);
        assert_eq!(s.counter.cycles_completed_in_direction, 0);
    }

    #[test]
    fn return_with_unused_chamber_is_not_a_cycle() {
        let counter = CycleCounter {
            cycles_completed_in_direction: 4,
            flow_direction: FlowDirection::Forward,
        };
        let mut i = input(0.0);
        i.chamber_used = false;
        let s = fsm_transition(SamplingState::FlowWay2, counter, FsmEvent::SampleReturned, i, &limits()).unwrap();
        assert_eq!(s.to, SamplingState::Idle);
        assert!(!s.cycle_completed && !s.direction_flipped);
        assert_eq!(s.counter, counter);
    }

    #[test]
    fn timeout_forces_safe_state() {
        let s = fsm_transition(
            SamplingState::Depressurization,
            CycleCounter::default(),
            FsmEvent::Tick,
            FsmInput {
                pressure: PressureBar(5.0),
                elapsed_in_state: Duration::from_millis(120_100),
                chamber_used: true,
            },
            &limits(),
        )
        .unwrap();
        assert_eq!(s.to, SamplingState::SafeState);
        assert_eq!(s.reason, TransitionReason::Timeout);
    }

    #[test]
    fn illegal_event_leaves_state() {
        let e = go(SamplingState::Idle, FsmEvent::MeasurementsDone, 0.0).unwrap_err();
        assert_eq!(
            e,
            FsmError::IllegalEvent {
                state: SamplingState::Idle,
                event: FsmEvent::MeasurementsDone
            }
        );
    }

    #[test]
    fn emergency_shutdown_is_latched() {
        for ev in FsmEvent::ALL {
            if ev == FsmEvent::ShutdownReset {
                continue;
            }
            if let Ok(s) = go(SamplingState::EmergencyShutdown, ev, 9.0) {
                assert_eq!(s.to, SamplingState::EmergencyShutdown, "{ev:?}");
            }
        }
        assert!(matches!(
            go(SamplingState::EmergencyShutdown, FsmEvent::ShutdownReset, 9.0),
            Err(FsmError::ResetWhileOverpressure(_))
        ));
        let reset = go(SamplingState::EmergencyShutdown, FsmEvent::ShutdownReset, 3.0).unwrap();
        assert_eq!(reset.to, SamplingState::Depressurization);
    }

    #[test]
    fn flow_paths_follow_direction() {
        let fwd = ValveCommand::for_state(SamplingState::FlowWay1, FlowDirection::Forward);
        let rev = ValveCommand::for_state(SamplingState::FlowWay2, FlowDirection::Reverse);
        let ValveCommand::Set { valves: f } = fwd else { panic!() };
        let ValveCommand::Set { valves: r } = rev else { panic!() };
        assert!(f.inlet_fwd.is_open() && !f.inlet_rev.is_open());
        assert!(r.outlet_rev.is_open() && !r.outlet_fwd.is_open());
    }
}
