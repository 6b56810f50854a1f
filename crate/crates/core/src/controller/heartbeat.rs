use std::time::Duration;

use crate::domain::MonotonicMs;

pub const HEARTBEAT_PERIOD: Duration = Duration::from_secs(1);

/// Rate limiter for outgoing heartbeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeartbeatTimer {
    period_ms: u64,
    next_due: Option<MonotonicMs>,
}

impl HeartbeatTimer {
    pub fn new(period: Duration) -> Self {
        Self {
            period_ms: period.as_millis() as u64,
            next_due: None,
        }
    }

    /// True when a heartbeat should go out at `now`. The first call always
    /// fires; afterwards at most one beat per period.
    pub fn due(&mut self, now: MonotonicMs) -> bool {
        match self.next_due {
            Some(t) if now < t => false,
            _ => {
                self.next_due = Some(now + self.period_ms);
                true
            }
        }
    }
}

impl Default for HeartbeatTimer {
    fn default() -> Self {
        Self::new(HEARTBEAT_PERIOD)
    }
}
