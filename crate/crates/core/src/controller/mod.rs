//! Embedded controller logic: the sampling state machine, the measurement
//! sequence and its numerics, the communication watchdog and the tick loop
//! that drives them.

pub mod calibration;
pub mod compensation;
pub mod depressurize;
pub mod fsm;
pub mod heartbeat;
pub mod runtime;
pub mod sequence;
pub mod stats;
pub mod watchdog;

pub use calibration::{fit_calibration, Calibration, CalibrationCurve, CalibrationError, QuadCoeffs};
pub use compensation::{compensate_temperature, compensation_gain};
pub use depressurize::{depressurize_duty_cycle, DutyCycleError, VentSchedule};
pub use fsm::{
    fsm_transition, CycleCounter, FsmError, FsmEvent, FsmInput, FsmLimits, FsmStep, SamplingState,
    StateTimeouts, TransitionReason, ValveCommand,
};
pub use heartbeat::HeartbeatTimer;
pub use runtime::{Controller, ControllerConfig, Hal, Persisted, TickReport};
pub use sequence::{
    run_measurement_sequence, ChamberSource, MeasurementSequence, PanelSummary, SensorUnavailable,
    SequenceConfig, SequenceError, SequenceStatus,
};
pub use stats::{mean_ci95, t_critical_975, MeanCi};
pub use watchdog::{watchdog_check, WatchdogState, WatchdogStatus};
