use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::MonotonicMs;

pub const DEFAULT_WATCHDOG_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WatchdogStatus {
    Ok,
    ForceSafeState,
}

/// Communication watchdog, kicked by every frame from the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchdogState {
    pub last_kick: MonotonicMs,
    #[serde(with = "crate::domain::duration_ms", rename = "timeout_ms")]
    pub timeout: Duration,
}

impl WatchdogState {
    pub fn new(now: MonotonicMs, timeout: Duration) -> Self {
        Self { last_kick: now, timeout }
    }

    pub fn kick(&mut self, now: MonotonicMs) {
        self.last_kick = self.last_kick.max(now);
    }
}

pub fn watchdog_check(wd: &WatchdogState, now: MonotonicMs) -> WatchdogStatus {
    if now.saturating_sub(wd.last_kick) > wd.timeout.as_millis() as u64 {
        WatchdogStatus::ForceSafeState
    } else {
        WatchdogStatus::Ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recent_kick_is_ok() {
        let wd = WatchdogState::new(10_000, DEFAULT_WATCHDOG_TIMEOUT);
        assert_eq!(watchdog_check(&wd, 10_500), WatchdogStatus::Ok);
        assert_eq!(watchdog_check(&wd, 12_000), WatchdogStatus::Ok);
    }

    #[test]
    fn stale_kick_forces_safe_state() {
        let wd = WatchdogState::new(10_000, DEFAULT_WATCHDOG_TIMEOUT);
        assert_eq!(watchdog_check(&wd, 12_500), WatchdogStatus::ForceSafeState);
    }
}
