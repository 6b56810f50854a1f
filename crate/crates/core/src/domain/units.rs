use std::fmt;

use serde::{Deserialize, Serialize};

/// Milliseconds since controller boot.
pub type MonotonicMs = u64;

/// Milliseconds since the Unix epoch (UTC), assigned by the server.
pub type WallMs = i64;

/// Gauge pressure in bar. 0 is ambient.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PressureBar(pub f64);

impl PressureBar {
    /// Burst rating of the sampling chamber.
    pub const BURST: PressureBar = PressureBar(15.0);
    pub const ATMOSPHERIC: PressureBar = PressureBar(0.0);

    pub fn bar(self) -> f64 {
        self.0
    }

    /// True when the value satisfies `0 <= p <= 15`.
    pub fn is_physical(self) -> bool {
        self.0.is_finite() && (0.0..=Self::BURST.0).contains(&self.0)
    }
}

impl fmt::Display for PressureBar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} bar", self.0)
    }
}

/// Gravity points: `(sg - 1) * 1000`, so 1.060 is 60 points.
pub fn gravity_points(sg: f64) -> f64 {
    (sg - 1.0) * 1000.0
}

pub fn sg_from_points(points: f64) -> f64 {
    1.0 + points / 1000.0
}

/// Serde adapter encoding a [`std::time::Duration`] as integer milliseconds.
pub mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        assert!((gravity_points(1.060) - 60.0).abs() < 1e-9);
        assert!((sg_from_points(10.0) - 1.010).abs() < 1e-12);
    }

    #[test]
    fn physical_bounds() {
        assert!(PressureBar(0.0).is_physical());
        assert!(PressureBar(15.0).is_physical());
        assert!(!PressureBar(15.01).is_physical());
        assert!(!PressureBar(-0.1).is_physical());
        assert!(!PressureBar(f64::NAN).is_physical());
    }
}
