//! Server-side safety monitoring.

use std::collections::BTreeMap;
use std::time::Duration;

use super::alerts::{AlertCondition, NewAlert, Severity};
use crate::controller::SamplingState;
use crate::domain::{MeasurementRecord, MonotonicMs, PressureBar, SensorId, WallMs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConfig {
    pub shutdown_threshold: PressureBar,
    pub heartbeat_period: Duration,
    /// More missed beats than this raise a connection warning.
    pub missed_beats: u32,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            shutdown_threshold: PressureBar(8.0),
            heartbeat_period: Duration::from_secs(1),
            missed_beats: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SafetyOutput {
    pub alerts: Vec<NewAlert>,
    pub resolved: Vec<AlertCondition>,
    pub emergency_stop: bool,
}

impl SafetyOutput {
    pub fn is_empty(&self) -> bool {
        self.alerts.is_empty() && self.resolved.is_empty() && !self.emergency_stop
    }
}

/// Edge-triggered: each condition raises once when it starts and resolves
/// when it ends.
#[derive(Debug, Clone)]
pub struct SafetyMonitor {
    cfg: SafetyConfig,
    overpressure: bool,
    heartbeat_lost: bool,
    safe_state: bool,
    last_heartbeat: Option<WallMs>,
    buffer_dropped: BTreeMap<u32, u64>,
}

impl SafetyMonitor {
    pub fn new(cfg: SafetyConfig) -> Self {
        Self {
            cfg,
            overpressure: false,
            heartbeat_lost: false,
            safe_state: false,
            last_heartbeat: None,
            buffer_dropped: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &SafetyConfig {
        &self.cfg
    }

    pub fn set_shutdown_threshold(&mut self, p: PressureBar) {
        self.cfg.shutdown_threshold = p;
    }

    pub fn observe_pressure(&mut self, p: PressureBar, at: Option<MonotonicMs>, out: &mut SafetyOutput) {
        let over = p.0 > self.cfg.shutdown_threshold.0;
        if over && !self.overpressure {
            out.alerts.push(NewAlert {
                severity: Severity::Critical,
                condition: AlertCondition::Overpressure,
                metric: Some("pressure".into()),
                observed: p.0,
                threshold: self.cfg.shutdown_threshold.0,
                controller_timestamp: at,
            });
            out.emergency_stop = true;
        } else if !over && self.overpressure {
            out.resolved.push(AlertCondition::Overpressure);
        }
        self.overpressure = over;
    }

    pub fn observe_heartbeat(&mut self, now: WallMs, out: &mut SafetyOutput) {
        self.last_heartbeat = Some(now);
        if self.heartbeat_lost {
            self.heartbeat_lost = false;
            out.resolved.push(AlertCondition::HeartbeatLost);
        }
    }

    pub fn observe_state(&mut self, state: SamplingState, pressure: PressureBar, at: MonotonicMs, out: &mut SafetyOutput) {
        let safe = state == SamplingState::SafeState;
        if safe && !self.safe_state {
            out.alerts.push(NewAlert {
                severity: Severity::Warning,
                condition: AlertCondition::SafeStateEntered,
                metric: None,
                observed: pressure.0,
                threshold: self.cfg.shutdown_threshold.0,
                controller_timestamp: Some(at),
            });
        } else if !safe && self.safe_state {
            out.resolved.push(AlertCondition::SafeStateEntered);
        }
        self.safe_state = safe;
    }

    /// One Info alert per out-of-range field.
    pub fn observe_record(&mut self, rec: &MeasurementRecord, out: &mut SafetyOutput) {
        for sensor in SensorId::CHAMBER {
            if rec.validity.get(sensor) {
                continue;
            }
            let (lo, hi) = sensor.valid_range();
            let v = rec.panel_mean.get(sensor).unwrap_or(f64::NAN);
            out.alerts.push(NewAlert {
                severity: Severity::Info,
                condition: AlertCondition::RangeInvalid,
                metric: Some(sensor.as_str().into()),
                observed: v,
                threshold: if v < lo { lo } else { hi },
                controller_timestamp: Some(rec.controller_timestamp),
            });
        }
    }

    pub fn observe_buffer(&mut self, boot_id: u32, dropped: u64, at: MonotonicMs, out: &mut SafetyOutput) {
        let prev = self.buffer_dropped.insert(boot_id, dropped).unwrap_or(0);
        if dropped > prev {
            out.alerts.push(NewAlert {
                severity: Severity::Warning,
                condition: AlertCondition::BufferOverflow,
                metric: None,
                observed: dropped as f64,
                threshold: prev as f64,
                controller_timestamp: Some(at),
            });
        }
    }

    /// Periodic check for heartbeat silence.
    pub fn tick(&mut self, now: WallMs, out: &mut SafetyOutput) {
        let Some(last) = self.last_heartbeat else {
            return;
        };
        let period = self.cfg.heartbeat_period.as_millis() as i64;
        let silence = now - last;
        let limit = period * (i64::from(self.cfg.missed_beats) + 1);
        if silence >= limit && !self.heartbeat_lost {
            self.heartbeat_lost = true;
            out.alerts.push(NewAlert {
                severity: Severity::Warning,
                condition: AlertCondition::HeartbeatLost,
                metric: None,
                observed: silence as f64,
                threshold: limit as f64,
                controller_timestamp: None,
            });
        }
    }
}
