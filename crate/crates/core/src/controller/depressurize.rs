//! Controlled venting by rapid switching of the vent valve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::PressureBar;
use crate::plant::ValvePosition;

/// Length of one open/close pulse period.
pub const PULSE_PERIOD_US: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DutyCycleError {
    #[error("target rate {target} bar/s exceeds full-open vent rate {k_out} bar/s")]
    RateUnachievable { target: f64, k_out: f64 },
    #[error("target rate must be positive")]
    NonPositiveRate,
    #[error("chamber is already at atmospheric pressure")]
    NothingToRelease,
}

/// Pulse train for the vent valve. Each period starts with the valve open for
/// `open_us` and closed for the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VentSchedule {
    pub period_us: u64,
    pub open_us: u64,
    pub duty: f64,
    /// Expected time to reach atmospheric at the target rate.
    pub expected_duration_us: u64,
}

impl VentSchedule {
    pub fn continuous() -> Self {
        Self {
            period_us: PULSE_PERIOD_US,
            open_us: PULSE_PERIOD_US,
            duty: 1.0,
            expected_duration_us: 0,
        }
    }

    /// Valve position `elapsed_us` after the schedule started.
    pub fn position_at(&self, elapsed_us: u64) -> ValvePosition {
        if elapsed_us % self.period_us < self.open_us {
            ValvePosition::Open
        } else {
            ValvePosition::Closed
        }
    }

    /// Switching instants in `[from_us, to_us)`, relative to the schedule
    /// start, with the position the valve takes at each one.
    pub fn edges(&self, from_us: u64, to_us: u64) -> Vec<(u64, ValvePosition)> {
        let mut out = Vec::new();
        if self.open_us == 0 || self.open_us >= self.period_us {
            return out;
        }
        let mut period_start = from_us - from_us % self.period_us;
        while period_start < to_us {
            for (t, pos) in [
                (period_start, ValvePosition::Open),
                (period_start + self.open_us, ValvePosition::Closed),
            ] {
                if t >= from_us && t < to_us {
                    out.push((t, pos));
                }
            }
            period_start += self.period_us;
        }
        out
    }
}

/// Builds the vent pulse schedule that releases pressure at `target_rate`
/// bar/s given a full-open vent rate of `k_out` bar/s.
pub fn depressurize_duty_cycle(
    current: PressureBar,
    target_rate: f64,
    k_out: f64,
) -> Result<VentSchedule, DutyCycleError> {
    if !(target_rate > 0.0) {
        return Err(DutyCycleError::NonPositiveRate);
    }
    if target_rate > k_out {
        return Err(DutyCycleError::RateUnachievable { target: target_rate, k_out });
    }
    if !(current.0 > 0.0) {
        return Err(DutyCycleError::NothingToRelease);
    }
    let duty = (target_rate / k_out).clamp(0.0, 1.0);
    let open_us = ((duty * PULSE_PERIOD_US as f64).round() as u64).min(PULSE_PERIOD_US);
    Ok(VentSchedule {
        period_us: PULSE_PERIOD_US,
        open_us,
        duty,
        expected_duration_us: (current.0 / target_rate * 1e6).round() as u64,
    })
}
