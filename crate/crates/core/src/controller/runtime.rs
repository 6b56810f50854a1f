//! The controller task: one call to [`Controller::tick`] per 100 ms.
//!
//! Each tick drains inbound frames (which kick the watchdog), samples the
//! chamber pressure, screens the interlocks, advances the sampling cycle and
//! queues outgoing frames. The plant is reached only through [`Hal`].

use std::collections::VecDeque;
use std::time::Duration;

use super::calibration::Calibration;
use super::depressurize::depressurize_duty_cycle;
use super::fsm::{
    fsm_transition, CycleCounter, FsmEvent, FsmInput, FsmLimits, FsmStep, SamplingState,
    StateTimeouts, TransitionReason, ValveCommand,
};
use super::heartbeat::{HeartbeatTimer, HEARTBEAT_PERIOD};
use super::sequence::{
    ChamberSource, MeasurementSequence, SensorUnavailable, SequenceConfig, SequenceStatus,
};
use super::watchdog::{watchdog_check, WatchdogState, WatchdogStatus, DEFAULT_WATCHDOG_TIMEOUT};
use crate::domain::{
    BatchConfig, CommandEnvelope, CommandId, CommandKind, Confirmation, HydrometerReading,
    MeasurementRecord, MonotonicMs, Origin, PressureBar, SafetyLevel, SensorId, ValidatedConfig,
    MAX_SAMPLING_INTERVAL, MIN_SAMPLING_INTERVAL,
};
use crate::plant::{ValveBank, ValveId, ValvePosition};
use crate::protocol::{
    CommandOutcome, CommandResult, DownBody, DownFrame, Frame, FrameBody, Heartbeat, Measurement,
    OutboundBuffer, ProbeEcho, StateChange, DEFAULT_BUFFER_CAPACITY,
};

/// Hardware abstraction: everything the controller can see or move.
pub trait Hal {
    fn read(&mut self, sensor: SensorId) -> Result<f64, SensorUnavailable>;
    /// Specific gravity and temperature from the floating hydrometer.
    fn read_hydrometer(&mut self) -> Result<(f64, f64), SensorUnavailable>;
    fn chamber_full(&mut self) -> bool;
    fn chamber_empty(&mut self) -> bool;
    /// Commands every valve; cancels any vent pulse train.
    fn set_valves(&mut self, valves: ValveBank);
    /// Starts pulsing the vent now, other valves unchanged.
    fn pulse_vent(&mut self, schedule: super::depressurize::VentSchedule);
}

struct HalSource<'a>(&'a mut dyn Hal);

impl ChamberSource for HalSource<'_> {
    fn read(&mut self, sensor: SensorId) -> Result<f64, SensorUnavailable> {
        self.0.read(sensor)
    }
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub batch: BatchConfig,
    pub timeouts: StateTimeouts,
    pub watchdog_timeout: Duration,
    pub heartbeat_period: Duration,
    /// Depressurization target, bar/s.
    pub vent_rate: f64,
    /// Full-open vent rate assumed when sizing the duty cycle, bar/s.
    pub vent_k_out: f64,
    /// Chamber pressure treated as released.
    pub release_pressure: PressureBar,
    pub calibration: Calibration,
    pub buffer_capacity: usize,
}

impl ControllerConfig {
    pub fn new(batch: ValidatedConfig) -> Self {
        Self {
            batch: batch.into_inner(),
            timeouts: StateTimeouts::default(),
            watchdog_timeout: DEFAULT_WATCHDOG_TIMEOUT,
            heartbeat_period: HEARTBEAT_PERIOD,
            vent_rate: 0.125,
            vent_k_out: 0.25,
            release_pressure: PressureBar(0.05),
            calibration: Calibration::default(),
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
        }
    }
}

/// State that survives a reboot (kept in non-volatile memory on the rig).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Persisted {
    pub counter: CycleCounter,
    pub cycles_completed: u64,
    pub chamber_used: bool,
    pub sampling_interval_ms: u64,
    pub shutdown_threshold: PressureBar,
    pub paused: bool,
}

/// What happened during one tick.
#[derive(Debug, Clone, Default)]
pub struct TickReport {
    /// Corrected chamber pressure sampled this tick.
    pub pressure: Option<PressureBar>,
    pub transitions: Vec<FsmStep>,
    pub records: Vec<MeasurementRecord>,
    pub hydrometer: Vec<HydrometerReading>,
    pub command_results: Vec<CommandResult>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    boot_id: u32,
    state: SamplingState,
    entered_at: MonotonicMs,
    counter: CycleCounter,
    cycles_completed: u64,
    chamber_used: bool,
    paused: bool,
    sampling_interval_ms: u64,
    shutdown_threshold: PressureBar,
    next_sample_at: MonotonicMs,
    cycle_requested: bool,
    watchdog: WatchdogState,
    heartbeat: HeartbeatTimer,
    probe: Option<ProbeEcho>,
    /// In SafeState because the link dropped or the controller rebooted;
    /// returning traffic is enough to recover.
    awaiting_comms: bool,
    pending_valves: Option<ValveCommand>,
    outbox: OutboundBuffer,
    inbox: VecDeque<(DownFrame, MonotonicMs)>,
    sequence: Option<MeasurementSequence>,
    pressure: PressureBar,
    console_seq: u64,
}

impl Controller {
    /// First power-up with an empty, vented chamber.
    pub fn new(cfg: ControllerConfig) -> Self {
        Self::start(cfg, 0, None, SamplingState::Idle)
    }

    /// Restart after a power loss. Comes up in SafeState with the monotonic
    /// clock back at zero and waits for the server before recovering.
    pub fn reboot(cfg: ControllerConfig, boot_id: u32, persisted: Persisted) -> Self {
        let mut c = Self::start(cfg, boot_id, Some(persisted), SamplingState::SafeState);
        c.awaiting_comms = true;
        c
    }

    fn start(
        cfg: ControllerConfig,
        boot_id: u32,
        persisted: Option<Persisted>,
        state: SamplingState,
    ) -> Self {
        let p = persisted.unwrap_or(Persisted {
            counter: CycleCounter::default(),
            cycles_completed: 0,
            chamber_used: false,
            sampling_interval_ms: cfg.batch.sampling_interval.as_millis() as u64,
            shutdown_threshold: cfg.batch.shutdown_threshold,
            paused: false,
        });
        let outbox = OutboundBuffer::new(boot_id, cfg.buffer_capacity);
        Self {
            boot_id,
            state,
            entered_at: 0,
            counter: p.counter,
            cycles_completed: p.cycles_completed,
            chamber_used: p.chamber_used,
            paused: p.paused,
            sampling_interval_ms: p.sampling_interval_ms,
            shutdown_threshold: p.shutdown_threshold,
            next_sample_at: 0,
            cycle_requested: false,
            watchdog: WatchdogState::new(0, cfg.watchdog_timeout),
            heartbeat: HeartbeatTimer::new(cfg.heartbeat_period),
            probe: None,
            awaiting_comms: false,
            pending_valves: Some(ValveCommand::for_state(state, p.counter.flow_direction)),
            outbox,
            inbox: VecDeque::new(),
            sequence: None,
            pressure: PressureBar(0.0),
            console_seq: 0,
            cfg,
        }
    }

    pub fn state(&self) -> SamplingState {
        self.state
    }

    pub fn counter(&self) -> CycleCounter {
        self.counter
    }

    pub fn cycles_completed(&self) -> u64 {
        self.cycles_completed
    }

    pub fn boot_id(&self) -> u32 {
        self.boot_id
    }

    pub fn pressure(&self) -> PressureBar {
        self.pressure
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn shutdown_threshold(&self) -> PressureBar {
        self.shutdown_threshold
    }

    pub fn sampling_interval(&self) -> Duration {
        Duration::from_millis(self.sampling_interval_ms)
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn outbox(&self) -> &OutboundBuffer {
        &self.outbox
    }

    pub fn persisted(&self) -> Persisted {
        Persisted {
            counter: self.counter,
            cycles_completed: self.cycles_completed,
            chamber_used: self.chamber_used,
            sampling_interval_ms: self.sampling_interval_ms,
            shutdown_threshold: self.shutdown_threshold,
            paused: self.paused,
        }
    }

    /// Queues a frame from the server, stamped with the controller clock at
    /// arrival. Processed on the next tick.
    pub fn receive(&mut self, frame: DownFrame, arrived_at: MonotonicMs) {
        self.inbox.push_back((frame, arrived_at));
    }

    /// Uplink frames to send now, including replays.
    pub fn transmit(&mut self, now: MonotonicMs) -> Vec<Frame> {
        self.outbox.poll(now)
    }

    fn next_console_id(&mut self) -> CommandId {
        self.console_seq += 1;
        CommandId(1 << 63 | u64::from(self.boot_id) << 32 | self.console_seq)
    }

    /// A command entered at the rig console. Forwarded to the server for
    /// authorization; an emergency stop also acts locally at once.
    pub fn console_command(&mut self, kind: CommandKind, now: MonotonicMs, hal: &mut dyn Hal) -> CommandId {
        let id = self.next_console_id();
        if kind == CommandKind::EmergencyStop {
            let mut sink = TickReport::default();
            let _ = self.fire(FsmEvent::EmergencyStop, now, hal, &mut sink);
        }
        let env = CommandEnvelope::new(id, kind, Origin::Physical, 0).with_confirmation(Confirmation::Physical);
        self.outbox.push(FrameBody::Command(env), now);
        id
    }

    /// Physical confirmation of a command pending on the server.
    pub fn console_confirm(&mut self, command_id: CommandId, kind: CommandKind, now: MonotonicMs) {
        let env = CommandEnvelope::new(command_id, kind, Origin::Physical, 0)
            .with_confirmation(Confirmation::Physical);
        self.outbox.push(FrameBody::Command(env), now);
    }

    pub fn console_ack_alert(&mut self, alert_id: u64, now: MonotonicMs) {
        self.outbox.push(FrameBody::AlertAck { alert_id }, now);
    }

    pub fn tick(&mut self, now: MonotonicMs, hal: &mut dyn Hal) -> TickReport {
        let mut rep = TickReport::default();
        if let Some(cmd) = self.pending_valves.take() {
            self.apply_valves(cmd, hal);
        }

        if let Ok(raw) = hal.read(SensorId::Pressure) {
            self.pressure = PressureBar(self.cfg.calibration.correct_pressure(raw));
            rep.pressure = Some(self.pressure);
        }

        while let Some((frame, at)) = self.inbox.pop_front() {
            self.watchdog.kick(at);
            if self.awaiting_comms && self.state == SamplingState::SafeState {
                let _ = self.fire(FsmEvent::CommsRestored, now, hal, &mut rep);
            }
            match frame.body {
                DownBody::Heartbeat { boot_id, acked_seq } => {
                    self.probe = Some(ProbeEcho { t1: frame.server_time_ms, t2: at });
                    if boot_id == self.boot_id {
                        self.outbox.ack(acked_seq);
                    }
                }
                DownBody::Command(env) => self.execute(env, now, hal, &mut rep),
            }
        }

        if watchdog_check(&self.watchdog, now) == WatchdogStatus::ForceSafeState
            && !self.state.is_safety_state()
        {
            let _ = self.fire(FsmEvent::WatchdogExpired, now, hal, &mut rep);
        }
        let _ = self.fire(FsmEvent::Tick, now, hal, &mut rep);

        let mut triggered = false;
        if now >= self.next_sample_at {
            self.next_sample_at = now + self.sampling_interval_ms;
            triggered = true;
            if let Ok((sg, temp)) = hal.read_hydrometer() {
                let reading = HydrometerReading {
                    specific_gravity: sg,
                    temperature: temp,
                    controller_timestamp: now,
                    server_timestamp: None,
                };
                self.outbox.push(
                    FrameBody::Measurement(Measurement::Hydrometer {
                        batch_id: self.cfg.batch.batch_id.clone(),
                        reading: reading.clone(),
                    }),
                    now,
                );
                rep.hydrometer.push(reading);
            }
        }

        self.advance(now, triggered, hal, &mut rep);

        if self.heartbeat.due(now) {
            let hb = Heartbeat {
                batch_id: self.cfg.batch.batch_id.clone(),
                state: self.state,
                pressure: self.pressure,
                counter: self.counter,
                cycles_completed: self.cycles_completed,
                paused: self.paused,
                echo: self.probe.take(),
                oldest_buffered: self.outbox.oldest_seq(),
                buffer_dropped: self.outbox.dropped(),
            };
            self.outbox.push(FrameBody::Heartbeat(hb), now);
        }
        rep
    }

    /// Progress events for the current state.
    fn advance(&mut self, now: MonotonicMs, triggered: bool, hal: &mut dyn Hal, rep: &mut TickReport) {
        use SamplingState as S;
        match self.state {
            S::Idle => {
                if (triggered || self.cycle_requested) && !self.paused {
                    self.cycle_requested = false;
                    let _ = self.fire(FsmEvent::HydrometerTrigger, now, hal, rep);
                }
            }
            S::FlowWay1 => {
                if hal.chamber_full() {
                    let _ = self.fire(FsmEvent::ChamberFull, now, hal, rep);
                }
            }
            S::Pressurization => {
                if self.pressure.0 >= self.cfg.batch.pressure_setpoint.0 {
                    let _ = self.fire(FsmEvent::PressureReached, now, hal, rep);
                }
            }
            S::Sampling => {
                let Some(seq) = self.sequence.as_mut() else {
                    return;
                };
                let status =
                    seq.on_tick(now, self.pressure, &mut HalSource(hal), &self.cfg.calibration);
                match status {
                    SequenceStatus::Done(summary) => {
                        let record = summary.into_record(
                            self.cfg.batch.batch_id.clone(),
                            self.cycles_completed,
                            self.counter.flow_direction,
                            now,
                        );
                        self.outbox.push(
                            FrameBody::Measurement(Measurement::Panel { record: record.clone() }),
                            now,
                        );
                        rep.records.push(record);
                        let _ = self.fire(FsmEvent::MeasurementsDone, now, hal, rep);
                    }
                    SequenceStatus::Aborted(err) => {
                        tracing::warn!(%err, "measurement sequence aborted");
                        let _ = self.fire(FsmEvent::Abort, now, hal, rep);
                    }
                    SequenceStatus::Stabilizing | SequenceStatus::Collecting { .. } => {}
                }
            }
            S::Depressurization => {
                if self.pressure.0 <= self.cfg.release_pressure.0 {
                    let _ = self.fire(FsmEvent::PressureReleased, now, hal, rep);
                }
            }
            S::FlowWay2 => {
                if hal.chamber_empty() {
                    let _ = self.fire(FsmEvent::SampleReturned, now, hal, rep);
                }
            }
            S::SafeState | S::EmergencyShutdown => {}
        }
    }

    fn limits(&self) -> FsmLimits {
        FsmLimits {
            shutdown_threshold: self.shutdown_threshold,
            timeouts: self.cfg.timeouts,
            cycles_per_direction: self.cfg.batch.cycles_per_direction,
        }
    }

    /// Feeds one event to the state machine and applies the outcome.
    fn fire(
        &mut self,
        event: FsmEvent,
        now: MonotonicMs,
        hal: &mut dyn Hal,
        rep: &mut TickReport,
    ) -> Result<(), super::fsm::FsmError> {
        let input = FsmInput {
            pressure: self.pressure,
            elapsed_in_state: Duration::from_millis(now.saturating_sub(self.entered_at)),
            chamber_used: self.chamber_used,
        };
        let step = match fsm_transition(self.state, self.counter, event, input, &self.limits()) {
            Ok(step) => step,
            Err(err) => {
                tracing::debug!(%err, "event ignored");
                return Err(err);
            }
        };
        self.counter = step.counter;
        if step.cycle_completed {
            self.cycles_completed += 1;
        }
        if !step.changed() {
            return Ok(());
        }
        self.state = step.to;
        self.entered_at = now;
        if let Some(cmd) = step.valves {
            self.apply_valves(cmd, hal);
        }
        match step.to {
            SamplingState::FlowWay1 => self.chamber_used = true,
            SamplingState::Idle => self.chamber_used = false,
            SamplingState::Sampling => {
                self.sequence = Some(MeasurementSequence::new(
                    SequenceConfig {
                        stabilization: self.cfg.batch.stabilization_time,
                        readings_per_sensor: self.cfg.batch.readings_per_sensor,
                        setpoint: self.cfg.batch.pressure_setpoint,
                    },
                    now,
                ));
            }
            _ => {}
        }
        if step.from == SamplingState::Sampling {
            self.sequence = None;
        }
        if step.to == SamplingState::SafeState {
            self.awaiting_comms = step.reason == TransitionReason::WatchdogExpired;
        }
        if step.to.is_safety_state() {
            tracing::warn!(from = %step.from, to = %step.to, reason = ?step.reason, pressure = self.pressure.0, "safety transition");
        } else {
            tracing::debug!(from = %step.from, to = %step.to, "transition");
        }
        self.outbox.push(
            FrameBody::StateChange(StateChange {
                batch_id: self.cfg.batch.batch_id.clone(),
                from: step.from,
                to: step.to,
                reason: step.reason,
                pressure: self.pressure,
                flow_direction: self.counter.flow_direction,
                cycles_completed: self.cycles_completed,
            }),
            now,
        );
        rep.transitions.push(step);
        Ok(())
    }

    fn apply_valves(&mut self, cmd: ValveCommand, hal: &mut dyn Hal) {
        match cmd {
            ValveCommand::Set { valves } => hal.set_valves(valves),
            ValveCommand::VentDutyCycle => {
                hal.set_valves(ValveBank::all_closed());
                match depressurize_duty_cycle(self.pressure, self.cfg.vent_rate, self.cfg.vent_k_out) {
                    Ok(schedule) => hal.pulse_vent(schedule),
                    Err(_) => hal.set_valves(ValveBank::all_closed().with(ValveId::Vent, ValvePosition::Open)),
                }
            }
        }
    }

    fn execute(&mut self, env: CommandEnvelope, now: MonotonicMs, hal: &mut dyn Hal, rep: &mut TickReport) {
        let outcome = self.apply_command(&env, now, hal, rep);
        if let CommandOutcome::Rejected { reason } = &outcome {
            tracing::info!(command = env.kind.name(), %reason, "command rejected");
        }
        let result = CommandResult {
            command_id: env.command_id,
            outcome,
        };
        self.outbox.push(FrameBody::CommandResult(result.clone()), now);
        rep.command_results.push(result);
    }

    fn apply_command(
        &mut self,
        env: &CommandEnvelope,
        now: MonotonicMs,
        hal: &mut dyn Hal,
        rep: &mut TickReport,
    ) -> CommandOutcome {
        use SamplingState as S;
        let reject = |reason: &str| CommandOutcome::Rejected { reason: reason.to_owned() };
        // Second line of defense behind the server's authorization.
        if env.kind.level() == SafetyLevel::Critical && env.origin != Origin::Physical {
            return reject("critical command without physical origin");
        }
        match &env.kind {
            CommandKind::SetSamplingInterval { interval_ms } => {
                let d = Duration::from_millis(*interval_ms);
                if d < MIN_SAMPLING_INTERVAL || d > MAX_SAMPLING_INTERVAL {
                    return reject("interval out of range");
                }
                let last = self.next_sample_at.saturating_sub(self.sampling_interval_ms);
                self.sampling_interval_ms = *interval_ms;
                self.next_sample_at = last + *interval_ms;
            }
            CommandKind::RequestSampleCycle => {
                if self.state.is_safety_state() {
                    return reject("safety state active");
                }
                self.cycle_requested = true;
            }
            CommandKind::PauseSampling => self.paused = true,
            CommandKind::ResumeSampling => {
                if self.state == S::EmergencyShutdown {
                    return reject("emergency shutdown latched");
                }
                self.paused = false;
            }
            CommandKind::ManualDepressurize => {
                if matches!(self.state, S::FlowWay1 | S::Pressurization | S::Sampling) {
                    let _ = self.fire(FsmEvent::Abort, now, hal, rep);
                }
            }
            CommandKind::OverridePressureLimit { limit } => {
                let b = &self.cfg.batch;
                if !(limit.0 > b.pressure_setpoint.0 && limit.0 < b.relief_threshold.0) {
                    return reject("limit outside setpoint..relief");
                }
                self.shutdown_threshold = *limit;
            }
            CommandKind::EmergencyStop => {
                let _ = self.fire(FsmEvent::EmergencyStop, now, hal, rep);
            }
            CommandKind::ResetEmergencyShutdown => {
                if !self.state.is_safety_state() {
                    return reject("not in a safety state");
                }
                if let Err(err) = self.fire(FsmEvent::ShutdownReset, now, hal, rep) {
                    return CommandOutcome::Rejected { reason: err.to_string() };
                }
            }
        }
        CommandOutcome::Executed
    }
}
