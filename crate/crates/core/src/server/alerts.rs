use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MonotonicMs, WallMs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertCondition {
    Overpressure,
    HeartbeatLost,
    RangeInvalid,
    SafeStateEntered,
    BufferOverflow,
}

impl AlertCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            AlertCondition::Overpressure => "overpressure",
            AlertCondition::HeartbeatLost => "heartbeat_lost",
            AlertCondition::RangeInvalid => "range_invalid",
            AlertCondition::SafeStateEntered => "safe_state_entered",
            AlertCondition::BufferOverflow => "buffer_overflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub alert_id: u64,
    pub severity: Severity,
    pub condition: AlertCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    pub observed: f64,
    pub threshold: f64,
    pub raised_at: WallMs,
    /// Controller time of the triggering observation, when there was one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_timestamp: Option<MonotonicMs>,
    pub acknowledged: bool,
    /// Whether the triggering condition still holds.
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleared_at: Option<WallMs>,
}

/// Alert to raise, before it gets an id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewAlert {
    pub severity: Severity,
    pub condition: AlertCondition,
    pub metric: Option<String>,
    pub observed: f64,
    pub threshold: f64,
    pub controller_timestamp: Option<MonotonicMs>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlertError {
    #[error("unknown alert {0}")]
    UnknownAlert(u64),
}

/// Alert history. An alert clears once its condition resolves; a Critical
/// alert additionally needs an acknowledgment first.
#[derive(Debug, Clone, Default)]
pub struct AlertLog {
    alerts: Vec<AlertEvent>,
}

impl AlertLog {
    pub fn raise(&mut self, a: NewAlert, now: WallMs) -> AlertEvent {
        let ev = AlertEvent {
            alert_id: self.alerts.len() as u64 + 1,
            severity: a.severity,
            condition: a.condition,
            metric: a.metric,
            observed: a.observed,
            threshold: a.threshold,
            raised_at: now,
            controller_timestamp: a.controller_timestamp,
            acknowledged: false,
            active: true,
            cleared_at: None,
        };
        match ev.severity {
            Severity::Critical => tracing::error!(condition = ev.condition.as_str(), observed = ev.observed, "alert"),
            Severity::Warning => tracing::warn!(condition = ev.condition.as_str(), observed = ev.observed, "alert"),
            Severity::Info => tracing::info!(condition = ev.condition.as_str(), observed = ev.observed, "alert"),
        }
        self.alerts.push(ev.clone());
        ev
    }

    pub fn acknowledge(&mut self, alert_id: u64, now: WallMs) -> Result<AlertEvent, AlertError> {
        let a = self
            .alerts
            .iter_mut()
            .find(|a| a.alert_id == alert_id)
            .ok_or(AlertError::UnknownAlert(alert_id))?;
        a.acknowledged = true;
        if !a.active && a.cleared_at.is_none() {
            a.cleared_at = Some(now);
        }
        Ok(a.clone())
    }

    /// Marks the condition resolved on every open alert of that kind.
    /// Returns the alerts that cleared.
    pub fn resolve(&mut self, condition: AlertCondition, now: WallMs) -> Vec<AlertEvent> {
        let mut out = Vec::new();
        for a in self.alerts.iter_mut().filter(|a| a.condition == condition && a.active) {
            a.active = false;
            if a.severity < Severity::Critical || a.acknowledged {
                a.cleared_at = Some(now);
                out.push(a.clone());
            }
        }
        out
    }

    pub fn all(&self) -> &[AlertEvent] {
        &self.alerts
    }

    pub fn open(&self) -> impl Iterator<Item = &AlertEvent> {
        self.alerts.iter().filter(|a| a.cleared_at.is_none())
    }

    pub fn len(&self) -> usize {
        self.alerts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alerts.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alert(sev: Severity, cond: AlertCondition) -> NewAlert {
        NewAlert {
            severity: sev,
            condition: cond,
            metric: None,
            observed: 0.0,
            threshold: 0.0,
            controller_timestamp: None,
        }
    }

    #[test]
    fn critical_needs_ack_before_clearing() {
        let mut log = AlertLog::default();
        let a = log.raise(alert(Severity::Critical, AlertCondition::Overpressure), 0);
        assert!(log.resolve(AlertCondition::Overpressure, 10).is_empty());
        assert_eq!(log.open().count(), 1);
        let acked = log.acknowledge(a.alert_id, 20).unwrap();
        assert_eq!(acked.cleared_at, Some(20));
        assert_eq!(log.open().count(), 0);
    }

    #[test]
    fn warnings_auto_clear() {
        let mut log = AlertLog::default();
        log.raise(alert(Severity::Warning, AlertCondition::HeartbeatLost), 0);
        let cleared = log.resolve(AlertCondition::HeartbeatLost, 5);
        assert_eq!(cleared.len(), 1);
        assert_eq!(cleared[0].cleared_at, Some(5));
    }

    #[test]
    fn acknowledged_critical_clears_on_resolve() {
        let mut log = AlertLog::default();
        let a = log.raise(alert(Severity::Critical, AlertCondition::Overpressure), 0);
        log.acknowledge(a.alert_id, 1).unwrap();
        assert_eq!(log.open().count(), 1);
        assert_eq!(log.resolve(AlertCondition::Overpressure, 2).len(), 1);
    }

    #[test]
    fn unknown_ack() {
        assert_eq!(AlertLog::default().acknowledge(3, 0), Err(AlertError::UnknownAlert(3)));
    }
}
