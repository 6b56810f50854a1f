//! Round-trip clock offset estimation between the controller's monotonic
//! clock and the server's wall clock.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MonotonicMs, WallMs};

/// Offset of the controller clock relative to the server clock, so that
/// `server = controller - offset_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockOffset {
    pub offset_ms: f64,
    pub round_trip_ms: f64,
    pub estimated_at: WallMs,
}

impl ClockOffset {
    pub fn to_server(&self, controller: MonotonicMs) -> WallMs {
        (controller as f64 - self.offset_ms).round() as WallMs
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClockError {
    #[error("negative round trip {0} ms")]
    NegativeRoundTrip(f64),
}

/// `t1`/`t4` are server send/receive times, `t2`/`t3` controller
/// receive/send times.
pub fn estimate_offset(
    t1: WallMs,
    t2: MonotonicMs,
    t3: MonotonicMs,
    t4: WallMs,
) -> Result<ClockOffset, ClockError> {
    let (t1, t2, t3, t4) = (t1 as f64, t2 as f64, t3 as f64, t4 as f64);
    let round_trip_ms = (t4 - t1) - (t3 - t2);
    if round_trip_ms < 0.0 {
        return Err(ClockError::NegativeRoundTrip(round_trip_ms));
    }
    Ok(ClockOffset {
        offset_ms: ((t2 - t1) + (t3 - t4)) / 2.0,
        round_trip_ms,
        estimated_at: t4 as WallMs,
    })
}

pub const DEFAULT_MAX_ROUND_TRIP_MS: f64 = 1_000.0;
const WINDOW: usize = 8;

/// Keeps recent estimates and reports the one with the shortest round trip,
/// which bounds its error tightest. Estimates with an implausibly long round
/// trip (a heartbeat replayed after an outage) are discarded.
#[derive(Debug, Clone)]
pub struct OffsetTracker {
    window: VecDeque<ClockOffset>,
    max_round_trip_ms: f64,
}

impl Default for OffsetTracker {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_ROUND_TRIP_MS)
    }
}

impl OffsetTracker {
    pub fn new(max_round_trip_ms: f64) -> Self {
        Self {
            window: VecDeque::with_capacity(WINDOW),
            max_round_trip_ms,
        }
    }

    /// Returns true when the estimate was kept.
    pub fn observe(&mut self, est: ClockOffset) -> bool {
        if est.round_trip_ms > self.max_round_trip_ms {
            return false;
        }
        if self.window.len() == WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(est);
        true
    }

    pub fn current(&self) -> Option<ClockOffset> {
        self.window
            .iter()
            .copied()
            .min_by(|a, b| a.round_trip_ms.total_cmp(&b.round_trip_ms))
    }
}
