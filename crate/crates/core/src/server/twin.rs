//! The twin server: ingestion, reconciliation, storage, pub-sub, safety
//! monitoring and command control behind one thread-safe handle.
//!
//! Uplink frames are accepted strictly in sequence per controller boot, so a
//! replay after an outage lands in original order and repeats are dropped.
//! Controller timestamps are mapped to wall clock with the offset estimated
//! for that boot; measurements from a boot with no estimate yet are held
//! until one exists. Stored timestamps are nudged forward by a millisecond
//! when needed to keep every series strictly increasing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::alerts::{AlertError, AlertEvent, AlertLog, NewAlert};
use super::analysis::{analyze, AnalysisError, AnalysisParams, TrendReport};
use super::clock::{estimate_offset, ClockOffset, OffsetTracker, DEFAULT_MAX_ROUND_TRIP_MS};
use super::control::{CommandError, CommandRecord, ControlService, Decision, SafetyContext};
use super::metric::Metric;
use super::pubsub::{Broker, Publication, SubscriptionId, TopicFilter};
use super::safety::{SafetyConfig, SafetyMonitor, SafetyOutput};
use super::store::{Resolution, SeriesData, StoreError, StoreStats, TimeSeriesStore, Point};
use crate::controller::{CycleCounter, SamplingState};
use crate::domain::{
    BatchConfig, BatchId, CommandEnvelope, CommandId, CommandKind, Confirmation, MonotonicMs,
    Origin, PressureBar, SensorId, WallMs, SG_RANGE,
};
use crate::protocol::{
    decode_line, CommandOutcome, DownBody, DownFrame, Frame, FrameBody, Heartbeat, Measurement,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub safety: SafetyConfig,
    pub pressure_setpoint: PressureBar,
    pub relief_threshold: PressureBar,
    pub probe_period: Duration,
    pub raw_retention: Duration,
    pub max_round_trip_ms: f64,
    pub analysis: AnalysisParams,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            safety: SafetyConfig::default(),
            pressure_setpoint: PressureBar(7.0),
            relief_threshold: PressureBar(10.0),
            probe_period: Duration::from_secs(1),
            raw_retention: super::store::DEFAULT_RAW_RETENTION,
            max_round_trip_ms: DEFAULT_MAX_ROUND_TRIP_MS,
            analysis: AnalysisParams::default(),
        }
    }
}

impl ServerConfig {
    /// Thresholds taken from a batch configuration.
    pub fn for_batch(batch: &BatchConfig) -> Self {
        let mut cfg = Self::default();
        cfg.safety.shutdown_threshold = batch.shutdown_threshold;
        cfg.pressure_setpoint = batch.pressure_setpoint;
        cfg.relief_threshold = batch.relief_threshold;
        cfg
    }
}

/// Messages on the live stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LiveData {
    Point {
        batch_id: BatchId,
        metric: Metric,
        boot_id: u32,
        timestamp: WallMs,
        value: f64,
        valid: bool,
        controller_timestamp: MonotonicMs,
    },
    Alert(AlertEvent),
    Controller(ControllerView),
    Command(CommandRecord),
}

pub const ALERTS_TOPIC: &str = "alerts";
pub const CONTROLLER_TOPIC: &str = "controller/state";
pub const COMMANDS_TOPIC: &str = "commands";

pub fn metric_topic(batch: &BatchId, metric: Metric) -> String {
    format!("batch/{}/{}", batch.as_str(), metric.as_str())
}

/// Latest known controller status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerView {
    pub boot_id: u32,
    pub state: SamplingState,
    pub pressure: PressureBar,
    pub counter: CycleCounter,
    pub cycles_completed: u64,
    pub paused: bool,
    pub controller_time_ms: MonotonicMs,
    pub updated_at: WallMs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_offset: Option<ClockOffset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub received_at: WallMs,
    pub line: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub frames_received: u64,
    pub frames_accepted: u64,
    pub duplicates: u64,
    pub out_of_order: u64,
    pub dead_letters: u64,
    pub measurement_frames: u64,
    pub panel_records: u64,
    pub hydrometer_readings: u64,
    pub points_stored: u64,
    /// Sequence numbers skipped because the controller's buffer overflowed.
    pub overflow_skipped: u64,
    pub offset_estimates: u64,
    pub offset_rejected: u64,
    pub timestamp_adjustments: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestOutcome {
    Accepted,
    /// In sequence but waiting for a clock offset.
    Held,
    Duplicate,
    /// Ahead of the expected sequence number; the controller will replay.
    OutOfOrder,
    Quarantined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch_id: BatchId,
    pub original_gravity: f64,
    pub expected_final_gravity: f64,
    pub metrics: Vec<Metric>,
    pub points: u64,
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("unknown batch {0}")]
    UnknownBatch(BatchId),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error(transparent)]
    Alert(#[from] AlertError),
}

#[derive(Debug, Default)]
struct BootLink {
    /// Next sequence number to accept.
    expected: u64,
    tracker: OffsetTracker,
    held: Vec<Frame>,
}

struct Core {
    cfg: ServerConfig,
    batches: BTreeMap<BatchId, BatchConfig>,
    links: BTreeMap<u32, BootLink>,
    current_boot: Option<u32>,
    probes: VecDeque<WallMs>,
    last_probe: Option<WallMs>,
    down_seq: u64,
    outbox: Vec<DownFrame>,
    safety: SafetyMonitor,
    alerts: AlertLog,
    control: ControlService,
    dead_letters: Vec<DeadLetter>,
    view: Option<ControllerView>,
    stats: IngestStats,
}

pub struct TwinServer {
    core: Mutex<Core>,
    store: RwLock<TimeSeriesStore>,
    broker: Broker<LiveData>,
}

impl std::fmt::Debug for TwinServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwinServer").finish_non_exhaustive()
    }
}

const MAX_OUTSTANDING_PROBES: usize = 32;

impl TwinServer {
    pub fn new(cfg: ServerConfig) -> Self {
        let store = TimeSeriesStore::new(cfg.raw_retention);
        Self::with_store(cfg, store)
    }

    pub fn with_store(cfg: ServerConfig, store: TimeSeriesStore) -> Self {
        Self {
            core: Mutex::new(Core {
                safety: SafetyMonitor::new(cfg.safety),
                cfg,
                batches: BTreeMap::new(),
                links: BTreeMap::new(),
                current_boot: None,
                probes: VecDeque::new(),
                last_probe: None,
                down_seq: 0,
                outbox: Vec::new(),
                alerts: AlertLog::default(),
                control: ControlService::default(),
                dead_letters: Vec::new(),
                view: None,
                stats: IngestStats::default(),
            }),
            store: RwLock::new(store),
            broker: Broker::default(),
        }
    }

    pub fn register_batch(&self, batch: BatchConfig) {
        self.core.lock().batches.insert(batch.batch_id.clone(), batch);
    }

    /// Decodes and ingests one NDJSON line received at `now`.
    pub fn ingest_line(&self, line: &str, now: WallMs) -> IngestOutcome {
        match decode_line::<Frame>(line) {
            Ok(frame) => self.ingest_frame(frame, now),
            Err(err) => {
                let mut core = self.core.lock();
                core.stats.frames_received += 1;
                core.quarantine(line.to_owned(), format!("decode: {err}"), now);
                IngestOutcome::Quarantined
            }
        }
    }

    pub fn ingest_frame(&self, frame: Frame, now: WallMs) -> IngestOutcome {
        let mut core = self.core.lock();
        core.stats.frames_received += 1;
        let boot = frame.boot_id;
        if core.current_boot.is_none_or(|b| boot > b) {
            if core.current_boot.is_some() {
                tracing::info!(boot_id = boot, "controller rebooted");
            }
            core.current_boot = Some(boot);
        }
        let link = core.links.entry(boot).or_insert_with(|| BootLink {
            expected: 1,
            ..BootLink::default()
        });
        if let FrameBody::Heartbeat(hb) = &frame.body {
            // Frames below the controller's oldest buffered one are gone for
            // good; stop waiting for them.
            if hb.oldest_buffered > link.expected {
                let skipped = hb.oldest_buffered - link.expected;
                link.expected = hb.oldest_buffered;
                core.stats.overflow_skipped += skipped;
                tracing::warn!(skipped, boot_id = boot, "uplink frames lost to buffer overflow");
            }
        }
        let link = core.links.get_mut(&boot).expect("link exists");
        if frame.seq < link.expected {
            core.stats.duplicates += 1;
            return IngestOutcome::Duplicate;
        }
        if frame.seq > link.expected {
            core.stats.out_of_order += 1;
            return IngestOutcome::OutOfOrder;
        }
        link.expected += 1;
        core.stats.frames_accepted += 1;
        self.process(&mut core, frame, now)
    }

    fn process(&self, core: &mut Core, frame: Frame, now: WallMs) -> IngestOutcome {
        let boot = frame.boot_id;
        let t3 = frame.controller_time_ms;
        match frame.body {
            FrameBody::Heartbeat(hb) => {
                self.on_heartbeat(core, boot, t3, hb, now);
                // A fresh offset may release held measurements.
                if core.links[&boot].tracker.current().is_some() {
                    let held = std::mem::take(&mut core.links.get_mut(&boot).expect("link").held);
                    for f in held {
                        self.process(core, f, now);
                    }
                }
                IngestOutcome::Accepted
            }
            FrameBody::StateChange(sc) => {
                let mut out = SafetyOutput::default();
                core.safety.observe_pressure(sc.pressure, Some(t3), &mut out);
                core.safety.observe_state(sc.to, sc.pressure, t3, &mut out);
                let offset = core.links[&boot].tracker.current();
                let view = ControllerView {
                    boot_id: boot,
                    state: sc.to,
                    pressure: sc.pressure,
                    counter: core.view.as_ref().map_or_else(CycleCounter::default, |v| v.counter),
                    cycles_completed: sc.cycles_completed,
                    paused: core.view.as_ref().is_some_and(|v| v.paused),
                    controller_time_ms: t3,
                    updated_at: now,
                    clock_offset: offset,
                };
                let view = ControllerView {
                    counter: CycleCounter {
                        flow_direction: sc.flow_direction,
                        ..view.counter
                    },
                    ..view
                };
                self.set_view(core, view, now);
                self.apply_safety(core, out, now);
                IngestOutcome::Accepted
            }
            FrameBody::Measurement(m) => {
                if !core.batches.contains_key(m.batch_id()) {
                    let line = crate::protocol::encode_line(&Frame {
                        body: FrameBody::Measurement(m.clone()),
                        ..frame
                    });
                    core.quarantine(line.trim_end().to_owned(), format!("unknown batch {}", m.batch_id()), now);
                    return IngestOutcome::Quarantined;
                }
                let Some(offset) = core.links[&boot].tracker.current() else {
                    core.links.get_mut(&boot).expect("link").held.push(Frame {
                        body: FrameBody::Measurement(m),
                        ..frame
                    });
                    return IngestOutcome::Held;
                };
                self.store_measurement(core, boot, m, offset, now);
                IngestOutcome::Accepted
            }
            FrameBody::AlertAck { alert_id } => {
                match core.alerts.acknowledge(alert_id, now) {
                    Ok(a) => {
                        self.broker.publish(ALERTS_TOPIC, now, LiveData::Alert(a));
                    }
                    Err(err) => tracing::warn!(%err, "console acknowledgment ignored"),
                }
                IngestOutcome::Accepted
            }
            FrameBody::Command(env) => {
                let env = CommandEnvelope {
                    origin: Origin::Physical,
                    ..env
                };
                let ctx = core.context();
                let decision = if core.control.contains(env.command_id) {
                    core.control
                        .confirm(env.command_id, Origin::Physical, &env.confirmations, &ctx, now)
                } else {
                    Ok(core.control.submit(env, &ctx, now))
                };
                match decision {
                    Ok(d) => self.dispatch(core, d, now),
                    Err(err) => tracing::warn!(%err, "console command ignored"),
                }
                IngestOutcome::Accepted
            }
            FrameBody::CommandResult(res) => {
                let failure = match res.outcome {
                    CommandOutcome::Executed => None,
                    CommandOutcome::Rejected { reason } => Some(reason),
                };
                if failure.is_none() {
                    if let Some(CommandKind::OverridePressureLimit { limit }) =
                        core.control.get(res.command_id).map(|r| r.envelope.kind.clone())
                    {
                        core.safety.set_shutdown_threshold(limit);
                    }
                }
                core.control.complete(res.command_id, failure, now);
                if let Some(r) = core.control.get(res.command_id).cloned() {
                    self.broker.publish(COMMANDS_TOPIC, now, LiveData::Command(r));
                }
                IngestOutcome::Accepted
            }
        }
    }

    fn on_heartbeat(&self, core: &mut Core, boot: u32, t3: MonotonicMs, hb: Heartbeat, now: WallMs) {
        if let Some(echo) = hb.echo {
            if let Some(pos) = core.probes.iter().position(|&t| t == echo.t1) {
                core.probes.remove(pos);
                match estimate_offset(echo.t1, echo.t2, t3, now) {
                    Ok(est) => {
                        let link = core.links.get_mut(&boot).expect("link");
                        if link.tracker.observe(est) {
                            core.stats.offset_estimates += 1;
                        } else {
                            core.stats.offset_rejected += 1;
                        }
                    }
                    Err(err) => {
                        core.stats.offset_rejected += 1;
                        tracing::warn!(%err, "clock estimate discarded");
                    }
                }
            }
        }
        let mut out = SafetyOutput::default();
        core.safety.observe_heartbeat(now, &mut out);
        core.safety.observe_pressure(hb.pressure, Some(t3), &mut out);
        core.safety.observe_state(hb.state, hb.pressure, t3, &mut out);
        core.safety.observe_buffer(boot, hb.buffer_dropped, t3, &mut out);
        let view = ControllerView {
            boot_id: boot,
            state: hb.state,
            pressure: hb.pressure,
            counter: hb.counter,
            cycles_completed: hb.cycles_completed,
            paused: hb.paused,
            controller_time_ms: t3,
            updated_at: now,
            clock_offset: core.links[&boot].tracker.current(),
        };
        self.set_view(core, view, now);
        self.apply_safety(core, out, now);
    }

    fn set_view(&self, core: &mut Core, view: ControllerView, now: WallMs) {
        // Stale frames from an older boot do not overwrite the view.
        if core.current_boot.is_some_and(|b| view.boot_id < b) {
            return;
        }
        core.view = Some(view.clone());
        self.broker.publish(CONTROLLER_TOPIC, now, LiveData::Controller(view));
    }

    fn store_measurement(&self, core: &mut Core, boot_id: u32, m: Measurement, offset: ClockOffset, now: WallMs) {
        let mut points: Vec<(Metric, f64, bool, MonotonicMs)> = Vec::new();
        let batch = m.batch_id().clone();
        match &m {
            Measurement::Panel { record } => {
                for sensor in SensorId::CHAMBER {
                    let value = record.panel_mean.get(sensor).expect("chamber sensor");
                    points.push((Metric::from_sensor(sensor), value, record.validity.get(sensor), record.controller_timestamp));
                }
                let mut out = SafetyOutput::default();
                if record.validity.pressure {
                    core.safety.observe_pressure(record.panel_mean.pressure, Some(record.controller_timestamp), &mut out);
                }
                core.safety.observe_record(record, &mut out);
                self.apply_safety(core, out, now);
                core.stats.panel_records += 1;
            }
            Measurement::Hydrometer { reading, .. } => {
                let sg_ok = (SG_RANGE.0..=SG_RANGE.1).contains(&reading.specific_gravity);
                let t_ok = SensorId::Temperature.in_range(reading.temperature);
                points.push((Metric::SpecificGravity, reading.specific_gravity, sg_ok, reading.controller_timestamp));
                points.push((Metric::TankTemperature, reading.temperature, t_ok, reading.controller_timestamp));
                core.stats.hydrometer_readings += 1;
            }
        }
        core.stats.measurement_frames += 1;
        let mut store = self.store.write();
        for (metric, value, valid, ctrl_ts) in points {
            let mut t = offset.to_server(ctrl_ts);
            if let Some(last) = store.last_timestamp(&batch, metric) {
                if t <= last {
                    t = last + 1;
                    core.stats.timestamp_adjustments += 1;
                }
            }
            let point = Point { t, value, valid };
            if let Err(err) = store.append(&batch, metric, point) {
                tracing::error!(%err, "store append failed");
                continue;
            }
            core.stats.points_stored += 1;
            self.broker.publish(
                &metric_topic(&batch, metric),
                now,
                LiveData::Point {
                    batch_id: batch.clone(),
                    metric,
                    boot_id,
                    timestamp: t,
                    value,
                    valid,
                    controller_timestamp: ctrl_ts,
                },
            );
        }
    }

    fn apply_safety(&self, core: &mut Core, out: SafetyOutput, now: WallMs) {
        for cond in out.resolved {
            for a in core.alerts.resolve(cond, now) {
                self.broker.publish(ALERTS_TOPIC, now, LiveData::Alert(a));
            }
        }
        for a in out.alerts {
            self.raise(core, a, now);
        }
        if out.emergency_stop {
            let id = core.control.next_id();
            let env = CommandEnvelope::new(id, CommandKind::EmergencyStop, Origin::Remote, now);
            let ctx = core.context();
            let d = core.control.submit(env, &ctx, now);
            self.dispatch(core, d, now);
        }
    }

    fn raise(&self, core: &mut Core, a: NewAlert, now: WallMs) {
        let ev = core.alerts.raise(a, now);
        self.broker.publish(ALERTS_TOPIC, now, LiveData::Alert(ev));
    }

    fn dispatch(&self, core: &mut Core, d: Decision, now: WallMs) {
        if let Some(env) = d.dispatch {
            core.push_down(DownBody::Command(env), now);
        }
        self.broker.publish(COMMANDS_TOPIC, now, LiveData::Command(d.record));
    }

    /// Periodic work: liveness probes, heartbeat-silence checks and expiry of
    /// pending commands.
    pub fn tick(&self, now: WallMs) {
        let mut core = self.core.lock();
        let period = core.cfg.probe_period.as_millis() as WallMs;
        if core.last_probe.is_none_or(|t| now - t >= period) {
            core.last_probe = Some(now);
            let boot_id = core.current_boot.unwrap_or(0);
            let acked_seq = core.links.get(&boot_id).map_or(0, |l| l.expected - 1);
            core.push_down(DownBody::Heartbeat { boot_id, acked_seq }, now);
            core.probes.push_back(now);
            if core.probes.len() > MAX_OUTSTANDING_PROBES {
                core.probes.pop_front();
            }
        }
        let mut out = SafetyOutput::default();
        core.safety.tick(now, &mut out);
        self.apply_safety(&mut core, out, now);
        for id in core.control.expire(now) {
            if let Some(r) = core.control.get(id).cloned() {
                self.broker.publish(COMMANDS_TOPIC, now, LiveData::Command(r));
            }
        }
    }

    /// Downlink frames produced since the last call, in send order.
    pub fn take_downlink(&self) -> Vec<DownFrame> {
        std::mem::take(&mut self.core.lock().outbox)
    }

    /// A command from the network. Only a Digital confirmation can be
    /// attached; anything else is discarded.
    pub fn submit_command(
        &self,
        kind: CommandKind,
        confirmations: BTreeSet<Confirmation>,
        now: WallMs,
    ) -> CommandRecord {
        let mut core = self.core.lock();
        let id = core.control.next_id();
        let mut env = CommandEnvelope::new(id, kind, Origin::Remote, now);
        env.confirmations = confirmations;
        let ctx = core.context();
        let d = core.control.submit(env, &ctx, now);
        let record = d.record.clone();
        self.dispatch(&mut core, d, now);
        record
    }

    /// Digital confirmation of a pending command.
    pub fn confirm_command(&self, id: CommandId, now: WallMs) -> Result<CommandRecord, ServerError> {
        let mut core = self.core.lock();
        let ctx = core.context();
        let d = core
            .control
            .confirm(id, Origin::Remote, &[Confirmation::Digital].into(), &ctx, now)?;
        let record = d.record.clone();
        self.dispatch(&mut core, d, now);
        Ok(record)
    }

    pub fn acknowledge_alert(&self, alert_id: u64, now: WallMs) -> Result<AlertEvent, ServerError> {
        let mut core = self.core.lock();
        let a = core.alerts.acknowledge(alert_id, now)?;
        self.broker.publish(ALERTS_TOPIC, now, LiveData::Alert(a.clone()));
        Ok(a)
    }

    pub fn command(&self, id: CommandId) -> Option<CommandRecord> {
        self.core.lock().control.get(id).cloned()
    }

    pub fn commands(&self) -> Vec<CommandRecord> {
        self.core.lock().control.records().cloned().collect()
    }

    pub fn alerts(&self) -> Vec<AlertEvent> {
        self.core.lock().alerts.all().to_vec()
    }

    pub fn dead_letters(&self) -> Vec<DeadLetter> {
        self.core.lock().dead_letters.clone()
    }

    pub fn stats(&self) -> IngestStats {
        self.core.lock().stats
    }

    pub fn controller_view(&self) -> Option<ControllerView> {
        self.core.lock().view.clone()
    }

    pub fn clock_offset(&self, boot_id: u32) -> Option<ClockOffset> {
        self.core.lock().links.get(&boot_id).and_then(|l| l.tracker.current())
    }

    pub fn config(&self) -> ServerConfig {
        self.core.lock().cfg.clone()
    }

    pub fn batch(&self, id: &BatchId) -> Option<BatchConfig> {
        self.core.lock().batches.get(id).cloned()
    }

    pub fn batches(&self) -> Vec<BatchSummary> {
        let batches: Vec<BatchConfig> = self.core.lock().batches.values().cloned().collect();
        let store = self.store.read();
        batches
            .into_iter()
            .map(|b| {
                let metrics = store.metrics(&b.batch_id);
                let points = metrics.iter().map(|m| store.appended(&b.batch_id, *m)).sum();
                BatchSummary {
                    batch_id: b.batch_id.clone(),
                    original_gravity: b.original_gravity,
                    expected_final_gravity: b.expected_final_gravity,
                    metrics,
                    points,
                }
            })
            .collect()
    }

    pub fn query_range(
        &self,
        batch: &BatchId,
        metric: Metric,
        from: WallMs,
        to: WallMs,
        resolution: Resolution,
    ) -> Result<SeriesData, ServerError> {
        if self.batch(batch).is_none() {
            return Err(ServerError::UnknownBatch(batch.clone()));
        }
        Ok(self.store.read().query_range(batch, metric, from, to, resolution)?)
    }

    /// Trend analysis over the stored valid gravity readings. Runs outside
    /// the ingestion lock.
    pub fn trend(&self, batch: &BatchId) -> Result<TrendReport, ServerError> {
        let cfg = self.batch(batch).ok_or_else(|| ServerError::UnknownBatch(batch.clone()))?;
        let params = self.core.lock().cfg.analysis;
        let history: Vec<(WallMs, f64)> = self
            .store
            .read()
            .raw(batch, Metric::SpecificGravity)
            .into_iter()
            .filter(|p| p.valid)
            .map(|p| (p.t, p.value))
            .collect();
        Ok(analyze(&history, cfg.original_gravity, cfg.expected_final_gravity, &params)?)
    }

    pub fn store_stats(&self) -> StoreStats {
        self.store.read().stats()
    }

    /// Read access to the store.
    pub fn read_store<R>(&self, f: impl FnOnce(&TimeSeriesStore) -> R) -> R {
        f(&self.store.read())
    }

    pub fn flush_store(&self) -> Result<(), StoreError> {
        self.store.write().flush()
    }

    pub fn subscribe(
        &self,
        filter: TopicFilter,
        sink: impl FnMut(&Arc<Publication<LiveData>>) -> bool + Send + 'static,
    ) -> SubscriptionId {
        self.broker.subscribe(filter, sink)
    }

    pub fn subscribe_channel(
        &self,
        filter: TopicFilter,
    ) -> (SubscriptionId, std::sync::mpsc::Receiver<Arc<Publication<LiveData>>>) {
        self.broker.subscribe_channel(filter)
    }

    pub fn unsubscribe(&self, id: SubscriptionId) -> bool {
        self.broker.unsubscribe(id)
    }

    pub fn subscriber_count(&self) -> usize {
        self.broker.subscriber_count()
    }
}

impl Core {
    fn context(&self) -> SafetyContext {
        SafetyContext {
            state: self.view.as_ref().map(|v| v.state),
            pressure_setpoint: self.cfg.pressure_setpoint,
            relief_threshold: self.cfg.relief_threshold,
        }
    }

    fn push_down(&mut self, body: DownBody, now: WallMs) {
        self.down_seq += 1;
        self.outbox.push(DownFrame {
            seq: self.down_seq,
            server_time_ms: now,
            body,
        });
    }

    fn quarantine(&mut self, line: String, error: String, now: WallMs) {
        tracing::warn!(%error, "frame quarantined");
        self.stats.dead_letters += 1;
        self.dead_letters.push(DeadLetter {
            received_at: now,
            line,
            error,
        });
    }
}
