//! Closed-loop simulation of plant, controller, link and server on one
//! simulated clock.
//!
//! Each 100 ms tick runs, in order: scheduled events, link deliveries due by
//! the tick, the controller tick, uplink transmission, the server tick and
//! downlink transmission, the plant step (split at vent pulse edges) and the
//! invariant checks.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc::Receiver;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::model::{Action, Scenario};
use super::rig::Rig;
use crate::controller::{Controller, ControllerConfig, SamplingState, TransitionReason};
use crate::domain::{
    validate_config, CommandKind, Confirmation, FlowDirection, MonotonicMs, Origin, PressureBar,
    SafetyLevel, SensorId, WallMs,
};
use crate::plant::{FaultKind, PlantState, SIM_TICK};
use crate::protocol::{decode_line, encode_line, Direction, DownFrame, FrameBody, Measurement, SimLink};
use crate::server::{
    AlertCondition, AlertEvent, CommandRecord, CommandStatus, IngestStats, LiveData, Metric,
    Publication, ServerConfig, Severity, StoreStats, TopicFilter, TwinServer, ALERTS_TOPIC,
};

/// Pressure a single tick may carry past the relief threshold.
pub const RELIEF_OVERSHOOT: f64 = 0.05;

const TICK_US: u64 = SIM_TICK.as_micros() as u64;

/// Upper edges of the safety latency histogram, in milliseconds. A final
/// open-ended bin catches the rest.
pub const LATENCY_BINS_MS: [u64; 5] = [100, 200, 300, 400, 500];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Speed {
    /// As fast as the machine allows.
    #[default]
    Max,
    /// Simulated seconds per wall second.
    Factor(f64),
}

impl std::str::FromStr for Speed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Speed::Max),
            "realtime" => Ok(Speed::Factor(1.0)),
            _ => match s.parse::<f64>() {
                Ok(f) if f > 0.0 && f.is_finite() => Ok(Speed::Factor(f)),
                _ => Err(format!("speed must be 'max', 'realtime' or a positive factor, got {s:?}")),
            },
        }
    }
}

impl TryFrom<String> for Speed {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Speed> for String {
    fn from(s: Speed) -> String {
        s.to_string()
    }
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speed::Max => f.write_str("max"),
            Speed::Factor(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleEntry {
    pub index: u64,
    pub started_at_ms: u64,
    pub completed_at_ms: u64,
    pub duration_ms: u64,
    pub direction: FlowDirection,
    /// Highest true chamber pressure during the cycle.
    pub max_pressure: PressureBar,
}

/// Timing and pressure summary over completed cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub count: u64,
    pub min_duration_ms: u64,
    pub mean_duration_ms: f64,
    pub max_duration_ms: u64,
    /// Highest per-cycle maximum pressure.
    pub max_pressure: PressureBar,
    pub mean_max_pressure: f64,
}

impl CycleStats {
    pub fn from_cycles(cycles: &[CycleEntry]) -> Option<Self> {
        if cycles.is_empty() {
            return None;
        }
        let n = cycles.len() as f64;
        let durations = cycles.iter().map(|c| c.duration_ms);
        let pressures = cycles.iter().map(|c| c.max_pressure.0);
        Some(Self {
            count: cycles.len() as u64,
            min_duration_ms: durations.clone().min().expect("non-empty"),
            mean_duration_ms: durations.clone().map(|d| d as f64).sum::<f64>() / n,
            max_duration_ms: durations.max().expect("non-empty"),
            max_pressure: PressureBar(pressures.clone().fold(f64::NEG_INFINITY, f64::max)),
            mean_max_pressure: pressures.sum::<f64>() / n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionSwitch {
    pub at_ms: u64,
    pub after_cycles: u64,
    pub to: FlowDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub at_ms: u64,
    pub boot_id: u32,
    pub from: SamplingState,
    pub to: SamplingState,
    pub reason: TransitionReason,
    pub pressure: PressureBar,
}

/// One overpressure episode, timed from the first controller reading above
/// the shutdown threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyEpisode {
    pub reading_at_ms: u64,
    pub observed: PressureBar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vent_open_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_dispatched_at_ms: Option<u64>,
}

impl SafetyEpisode {
    /// Time until the vent command, the critical alert and the server's
    /// emergency stop have all happened.
    pub fn latency_ms(&self) -> Option<u64> {
        let v = self.vent_open_at_ms?;
        let a = self.alert_at_ms?;
        let s = self.stop_dispatched_at_ms?;
        Some(v.max(a).max(s) - self.reading_at_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBin {
    /// Inclusive upper edge; `None` for the overflow bin.
    pub upper_ms: Option<u64>,
    pub count: u64,
}

pub fn latency_histogram(latencies: impl IntoIterator<Item = u64>) -> Vec<LatencyBin> {
    let mut bins: Vec<LatencyBin> = LATENCY_BINS_MS
        .iter()
        .map(|&u| LatencyBin { upper_ms: Some(u), count: 0 })
        .chain([LatencyBin { upper_ms: None, count: 0 }])
        .collect();
    for l in latencies {
        let i = LATENCY_BINS_MS.iter().position(|&u| l <= u).unwrap_or(LATENCY_BINS_MS.len());
        bins[i].count += 1;
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ReliefExceeded,
    BurstExceeded,
    /// Nitrogen inject and vent commanded open together.
    InjectVentInterlock,
    /// Inlet and outlet paths commanded open together.
    PassThrough,
    SafetyDeadlineMissed,
    RemoteCriticalExecuted,
    EmergencyStopRefused,
    MeasurementLost,
    TimestampNotMonotonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub at_ms: u64,
    pub kind: ViolationKind,
    pub detail: String,
}

/// Identity of one stored value, independent of its server timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PointKey {
    pub metric: Metric,
    pub boot_id: u32,
    pub controller_timestamp: MonotonicMs,
    pub value_bits: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryCheck {
    pub sent: u64,
    pub stored: u64,
    pub missing: u64,
    pub unexpected: u64,
    pub non_monotonic: u64,
}

impl DeliveryCheck {
    pub fn is_exact(&self) -> bool {
        self.missing == 0 && self.unexpected == 0 && self.non_monotonic == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub simulated_ms: u64,
    pub ticks: u64,
    pub boots: u32,
    pub final_state: Option<SamplingState>,
    pub cycles_completed: u64,
    pub cycles: Vec<CycleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_stats: Option<CycleStats>,
    pub direction_switches: Vec<DirectionSwitch>,
    pub transitions: Vec<TransitionEntry>,
    pub max_pressure: PressureBar,
    pub safety_episodes: Vec<SafetyEpisode>,
    pub safety_latency_histogram: Vec<LatencyBin>,
    pub alerts: Vec<AlertEvent>,
    pub commands: Vec<CommandRecord>,
    pub ingest: IngestStats,
    pub store: StoreStats,
    pub delivery: DeliveryCheck,
    pub uplink_lost: u64,
    pub downlink_lost: u64,
    pub violations: Vec<Violation>,
}

impl RunReport {
    fn empty(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_owned(),
            seed,
            simulated_ms: 0,
            ticks: 0,
            boots: 1,
            final_state: None,
            cycles_completed: 0,
            cycles: Vec::new(),
            cycle_stats: None,
            direction_switches: Vec::new(),
            transitions: Vec::new(),
            max_pressure: PressureBar::ATMOSPHERIC,
            safety_episodes: Vec::new(),
            safety_latency_histogram: Vec::new(),
            alerts: Vec::new(),
            commands: Vec::new(),
            ingest: IngestStats::default(),
            store: StoreStats::default(),
            delivery: DeliveryCheck::default(),
            uplink_lost: 0,
            downlink_lost: 0,
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn critical_alerts(&self) -> impl Iterator<Item = &AlertEvent> {
        self.alerts.iter().filter(|a| a.severity == Severity::Critical)
    }
}

/// The full closed loop for one scenario.
pub struct SystemSim {
    scenario: Scenario,
    rig: Rig,
    server: Arc<TwinServer>,
    link: SimLink,
    now_us: u64,
    next_event: usize,
    points_rx: Receiver<Arc<Publication<LiveData>>>,
    alerts_rx: Receiver<Arc<Publication<LiveData>>>,
    sent_max_seq: BTreeMap<u32, u64>,
    sent_points: Vec<PointKey>,
    stored_points: Vec<PointKey>,
    last_stored_t: BTreeMap<Metric, WallMs>,
    non_monotonic: u64,
    last_direction: FlowDirection,
    last_cycles: u64,
    cycle_started_ms: u64,
    cycle_max_pressure: PressureBar,
    overpressure_latched: bool,
    report: RunReport,
}

impl SystemSim {
    pub fn new(scenario: Scenario) -> Self {
        let seed = scenario.seed;
        Self::with_seed(scenario, seed)
    }

    /// Plant noise and link jitter come from separate streams derived from
    /// `seed`.
    pub fn with_seed(scenario: Scenario, seed: u64) -> Self {
        let server = Arc::new(TwinServer::new(ServerConfig::for_batch(&scenario.batch)));
        Self::with_server(scenario, seed, server)
    }

    /// Runs against an existing server, which may also be serving clients.
    /// The scenario's batch is registered on it.
    pub fn with_server(scenario: Scenario, seed: u64, server: Arc<TwinServer>) -> Self {
        let batch = validate_config(scenario.batch.clone()).expect("scenario validated before run");
        let mut ctrl_cfg = ControllerConfig::new(batch);
        ctrl_cfg.timeouts = scenario.timeouts;
        let rig = Rig::new(scenario.plant.clone(), ctrl_cfg, seed);
        server.register_batch(scenario.batch.clone());
        let (_, points_rx) = server.subscribe_channel(TopicFilter::Prefix("batch/".into()));
        let (_, alerts_rx) = server.subscribe_channel(TopicFilter::Exact(ALERTS_TOPIC.into()));
        let last_direction = rig.controller().expect("powered").counter().flow_direction;
        Self {
            link: SimLink::new(scenario.link, seed ^ 0x5EED_0F11_4B5A_17E5),
            report: RunReport::empty(&scenario.name, seed),
            scenario,
            rig,
            server,
            now_us: 0,
            next_event: 0,
            points_rx,
            alerts_rx,
            sent_max_seq: BTreeMap::new(),
            sent_points: Vec::new(),
            stored_points: Vec::new(),
            last_stored_t: BTreeMap::new(),
            non_monotonic: 0,
            last_direction,
            last_cycles: 0,
            cycle_started_ms: 0,
            cycle_max_pressure: PressureBar::ATMOSPHERIC,
            overpressure_latched: false,
        }
    }

    pub fn server(&self) -> &Arc<TwinServer> {
        &self.server
    }

    pub fn controller(&self) -> Option<&Controller> {
        self.rig.controller()
    }

    pub fn plant_state(&self) -> &PlantState {
        self.rig.state()
    }

    pub fn now_ms(&self) -> u64 {
        self.now_us / 1000
    }

    /// Every measurement value the controller put on the wire, once each.
    pub fn sent_points(&self) -> &[PointKey] {
        &self.sent_points
    }

    /// Every value the server stored, in storage order.
    pub fn stored_points(&self) -> &[PointKey] {
        &self.stored_points
    }

    fn wall(&self, t_us: u64) -> WallMs {
        self.scenario.epoch_ms + (t_us / 1000) as WallMs
    }

    pub fn finished(&self) -> bool {
        let by_cycles = self
            .scenario
            .stop_after_cycles
            .is_some_and(|n| self.last_cycles >= n);
        by_cycles || self.now_ms() >= self.scenario.duration_ms
    }

    /// Runs to completion and returns the report.
    pub fn run(mut self, speed: Speed) -> RunReport {
        let started = Instant::now();
        while !self.finished() {
            self.step();
            if let Speed::Factor(f) = speed {
                let target = Duration::from_secs_f64(self.now_us as f64 / 1e6 / f);
                if let Some(wait) = target.checked_sub(started.elapsed()) {
                    std::thread::sleep(wait);
                }
            }
        }
        self.finish()
    }

    /// Advances one tick.
    pub fn step(&mut self) {
        let now = self.now_us;
        self.apply_events();
        self.deliver(now);
        self.tick_controller(now);
        let wall = self.wall(now);
        self.server.tick(wall);
        for frame in self.server.take_downlink() {
            self.link.send(Direction::Down, encode_line(&frame), now);
        }
        self.drain_subscriptions();
        self.rig.step_plant(now, now + TICK_US);
        self.now_us = now + TICK_US;
        self.check_invariants();
    }

    fn apply_events(&mut self) {
        while let Some(ev) = self.scenario.events.get(self.next_event) {
            if ev.at_ms > self.now_ms() {
                break;
            }
            let action = ev.action.clone();
            self.next_event += 1;
            self.apply(action);
        }
    }

    fn apply(&mut self, action: Action) {
        let now = self.now_us;
        let wall = self.wall(now);
        tracing::info!(at_ms = self.now_ms(), ?action, "scenario event");
        match action {
            Action::Inject { fault } => {
                self.rig.inject(fault);
                if fault == FaultKind::NetworkPartition {
                    self.link.set_partitioned(true);
                }
            }
            Action::Clear { fault } => {
                if self.rig.clear(fault, now) {
                    self.report.boots += 1;
                }
                if fault == FaultKind::NetworkPartition {
                    self.link.set_partitioned(false);
                }
            }
            Action::Command { origin: Origin::Remote, command } => {
                self.server.submit_command(command, [Confirmation::Digital].into(), wall);
            }
            Action::Command { origin: Origin::Physical, command } => {
                self.rig.console_command(command, now);
            }
            Action::ConfirmPending { origin } => {
                let pending = self
                    .server
                    .commands()
                    .into_iter()
                    .filter(|r| matches!(r.status, CommandStatus::Pending { .. }));
                for r in pending {
                    match origin {
                        Origin::Remote => {
                            if let Err(err) = self.server.confirm_command(r.envelope.command_id, wall) {
                                tracing::warn!(%err, "confirmation failed");
                            }
                        }
                        Origin::Physical => {
                            self.rig.console_confirm(r.envelope.command_id, r.envelope.kind, now)
                        }
                    }
                }
            }
            Action::AcknowledgeAlerts { origin } => {
                let open = self.server.alerts().into_iter().filter(|a| !a.acknowledged);
                for a in open {
                    match origin {
                        Origin::Remote => {
                            let _ = self.server.acknowledge_alert(a.alert_id, wall);
                        }
                        Origin::Physical => self.rig.console_ack_alert(a.alert_id, now),
                    }
                }
            }
        }
    }

    /// Hands over every link event due by `until_us`, in arrival order.
    fn deliver(&mut self, until_us: u64) {
        while let Some((_, dir)) = self.link.next_due(until_us) {
            let Some((t, line)) = self.link.pop(dir) else {
                break;
            };
            let Some(line) = line else {
                continue;
            };
            match dir {
                Direction::Up => {
                    self.server.ingest_line(&line, self.wall(t));
                }
                Direction::Down => match decode_line::<DownFrame>(&line) {
                    Ok(frame) => self.rig.receive(frame, t),
                    Err(err) => tracing::error!(%err, "undecodable downlink frame"),
                },
            }
        }
    }

    fn tick_controller(&mut self, now: u64) {
        let Some(rep) = self.rig.tick(now) else {
            return;
        };
        let ctrl = self.rig.controller().expect("ticked controller");
        let at_ms = self.now_ms();
        for step in &rep.transitions {
            if step.from == SamplingState::Idle && step.to == SamplingState::FlowWay1 {
                self.cycle_started_ms = at_ms;
                self.cycle_max_pressure = PressureBar::ATMOSPHERIC;
            }
            self.report.transitions.push(TransitionEntry {
                at_ms,
                boot_id: ctrl.boot_id(),
                from: step.from,
                to: step.to,
                reason: step.reason,
                pressure: ctrl.pressure(),
            });
        }
        let cycles = ctrl.cycles_completed();
        while self.last_cycles < cycles {
            self.last_cycles += 1;
            self.report.cycles.push(CycleEntry {
                index: self.last_cycles,
                started_at_ms: self.cycle_started_ms,
                completed_at_ms: at_ms,
                duration_ms: at_ms - self.cycle_started_ms,
                direction: self.last_direction,
                max_pressure: self.cycle_max_pressure,
            });
        }
        let dir = ctrl.counter().flow_direction;
        if dir != self.last_direction {
            self.report.direction_switches.push(DirectionSwitch {
                at_ms,
                after_cycles: cycles,
                to: dir,
            });
            self.last_direction = dir;
        }

        if let Some(p) = rep.pressure {
            let threshold = ctrl.shutdown_threshold();
            if p.0 > threshold.0 && !self.overpressure_latched {
                self.report.safety_episodes.push(SafetyEpisode {
                    reading_at_ms: at_ms,
                    observed: p,
                    vent_open_at_ms: None,
                    alert_at_ms: None,
                    stop_dispatched_at_ms: None,
                });
            }
            self.overpressure_latched = p.0 > threshold.0;
        }
        if let Some(ep) = self.report.safety_episodes.last_mut() {
            if ep.vent_open_at_ms.is_none() && self.rig.state().valve_states.vent.is_open() {
                ep.vent_open_at_ms = Some(at_ms);
            }
        }

        let boot = self.rig.boot_id();
        for frame in self.rig.transmit(now) {
            let max = self.sent_max_seq.entry(boot).or_insert(0);
            if frame.seq > *max {
                *max = frame.seq;
                if let FrameBody::Measurement(m) = &frame.body {
                    push_keys(&mut self.sent_points, boot, m);
                }
            }
            self.link.send(Direction::Up, encode_line(&frame), now);
        }
    }

    fn drain_subscriptions(&mut self) {
        while let Ok(p) = self.points_rx.try_recv() {
            if let LiveData::Point {
                metric,
                boot_id,
                timestamp,
                value,
                controller_timestamp,
                ..
            } = p.data
            {
                self.stored_points.push(PointKey {
                    metric,
                    boot_id,
                    controller_timestamp,
                    value_bits: value.to_bits(),
                });
                if self.last_stored_t.get(&metric).is_some_and(|&last| timestamp <= last) {
                    self.non_monotonic += 1;
                }
                self.last_stored_t.insert(metric, timestamp);
            }
        }
        let epoch = self.scenario.epoch_ms;
        let since_epoch = |t: WallMs| (t - epoch).max(0) as u64;
        while let Ok(p) = self.alerts_rx.try_recv() {
            if let LiveData::Alert(a) = &p.data {
                if a.severity == Severity::Critical && a.condition == AlertCondition::Overpressure {
                    let at = since_epoch(a.raised_at);
                    if let Some(ep) = self.report.safety_episodes.last_mut() {
                        if ep.alert_at_ms.is_none() && at >= ep.reading_at_ms {
                            ep.alert_at_ms = Some(at);
                        }
                    }
                }
            }
        }
        if let Some(ep) = self.report.safety_episodes.last_mut() {
            if ep.stop_dispatched_at_ms.is_none() {
                let stop = self.server.commands().into_iter().find(|r| {
                    r.envelope.kind == CommandKind::EmergencyStop
                        && since_epoch(r.envelope.issued_at) >= ep.reading_at_ms
                        && !matches!(r.status, CommandStatus::Rejected { .. })
                });
                ep.stop_dispatched_at_ms = stop.map(|r| since_epoch(r.envelope.issued_at));
            }
        }
    }

    fn violation(&mut self, kind: ViolationKind, detail: String) {
        let at_ms = self.now_ms();
        tracing::error!(?kind, %detail, at_ms, "invariant violated");
        self.report.violations.push(Violation { at_ms, kind, detail });
    }

    fn check_invariants(&mut self) {
        let p = self.rig.state().chamber_pressure;
        if p.0 > self.report.max_pressure.0 {
            self.report.max_pressure = p;
        }
        if p.0 > self.cycle_max_pressure.0 {
            self.cycle_max_pressure = p;
        }
        let relief = self.scenario.plant.relief_threshold.0;
        if p.0 > relief + RELIEF_OVERSHOOT {
            self.violation(ViolationKind::ReliefExceeded, format!("{:.4} bar", p.0));
        }
        if p.0 >= PressureBar::BURST.0 {
            self.violation(ViolationKind::BurstExceeded, format!("{:.4} bar", p.0));
        }
        let v = self.rig.state().valve_states;
        if v.n2_inject.is_open() && v.vent.is_open() {
            self.violation(ViolationKind::InjectVentInterlock, "n2_inject and vent open".into());
        }
        let inlet = v.inlet_fwd.is_open() || v.inlet_rev.is_open();
        let outlet = v.outlet_fwd.is_open() || v.outlet_rev.is_open();
        if inlet && outlet {
            self.violation(ViolationKind::PassThrough, "inlet and outlet open".into());
        }
    }

    /// Delivers what is still in flight and assembles the report.
    fn finish(mut self) -> RunReport {
        if self.now_us == 0 {
            return self.report;
        }
        let horizon = self.now_us + 1_000_000;
        self.deliver(horizon);
        self.drain_subscriptions();

        let deadline = self.scenario.batch.safety_response_deadline.as_millis() as u64;
        let episodes = self.report.safety_episodes.clone();
        for ep in &episodes {
            match ep.latency_ms() {
                Some(l) if l <= deadline => {}
                Some(l) => self.violation(ViolationKind::SafetyDeadlineMissed, format!("{l} ms")),
                None => self.violation(ViolationKind::SafetyDeadlineMissed, format!("{ep:?}")),
            }
        }
        self.report.safety_latency_histogram =
            latency_histogram(episodes.iter().filter_map(SafetyEpisode::latency_ms));

        let commands = self.server.commands();
        for r in &commands {
            let env = &r.envelope;
            let executed = matches!(r.status, CommandStatus::Completed | CommandStatus::Dispatched);
            if env.level == SafetyLevel::Critical && env.origin == Origin::Remote && executed {
                self.violation(ViolationKind::RemoteCriticalExecuted, env.command_id.to_string());
            }
            if env.kind == CommandKind::EmergencyStop
                && matches!(r.status, CommandStatus::Rejected { .. } | CommandStatus::Failed { .. })
            {
                self.violation(ViolationKind::EmergencyStopRefused, env.command_id.to_string());
            }
        }

        let mut sent = self.sent_points.clone();
        let mut stored = self.stored_points.clone();
        sent.sort_unstable();
        stored.sort_unstable();
        let (missing, unexpected) = multiset_difference(&sent, &stored);
        self.report.delivery = DeliveryCheck {
            sent: sent.len() as u64,
            stored: stored.len() as u64,
            missing,
            unexpected,
            non_monotonic: self.non_monotonic,
        };
        let overflow = self.server.stats().overflow_skipped;
        if (missing > 0 && overflow == 0) || unexpected > 0 {
            self.violation(
                ViolationKind::MeasurementLost,
                format!("{missing} missing, {unexpected} unexpected"),
            );
        }
        if self.non_monotonic > 0 {
            self.violation(ViolationKind::TimestampNotMonotonic, format!("{} points", self.non_monotonic));
        }

        self.report.simulated_ms = self.now_ms();
        self.report.ticks = self.now_us / TICK_US;
        self.report.final_state = self.rig.controller().map(Controller::state);
        self.report.cycles_completed = self.last_cycles;
        self.report.cycle_stats = CycleStats::from_cycles(&self.report.cycles);
        self.report.alerts = self.server.alerts();
        self.report.commands = commands;
        self.report.ingest = self.server.stats();
        self.report.store = self.server.store_stats();
        self.report.uplink_lost = self.link.lost(Direction::Up);
        self.report.downlink_lost = self.link.lost(Direction::Down);
        self.report
    }
}

fn push_keys(out: &mut Vec<PointKey>, boot_id: u32, m: &Measurement) {
    match m {
        Measurement::Panel { record } => {
            for sensor in SensorId::CHAMBER {
                let value = record.panel_mean.get(sensor).expect("chamber sensor");
                out.push(PointKey {
                    metric: Metric::from_sensor(sensor),
                    boot_id,
                    controller_timestamp: record.controller_timestamp,
                    value_bits: value.to_bits(),
                });
            }
        }
        Measurement::Hydrometer { reading, .. } => {
            for (metric, value) in [
                (Metric::SpecificGravity, reading.specific_gravity),
                (Metric::TankTemperature, reading.temperature),
            ] {
                out.push(PointKey {
                    metric,
                    boot_id,
                    controller_timestamp: reading.controller_timestamp,
                    value_bits: value.to_bits(),
                });
            }
        }
    }
}

/// Counts of `a \ b` and `b \ a` for sorted multisets.
fn multiset_difference<T: Ord>(a: &[T], b: &[T]) -> (u64, u64) {
    let (mut i, mut j) = (0, 0);
    let (mut only_a, mut only_b) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                only_a += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                only_b += 1;
                j += 1;
            }
        }
    }
    only_a += (a.len() - i) as u64;
    only_b += (b.len() - j) as u64;
    (only_a, only_b)
}
