//! Three-point pressure calibration.
//!
//! Each chamber sensor is characterized at 0, 3.5 and 7 bar against a
//! reference. The additive correction needed at each point is fitted with the
//! unique quadratic through the three points, and applied as
//! `corrected = raw + correction(P)`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{PressureBar, SensorId};
use crate::plant::{PlantSim, PlantState};

/// Calibration pressures in bar.
pub const CALIBRATION_PRESSURES: [f64; 3] = [0.0, 3.5, 7.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration pressures must be distinct")]
    DegeneratePoints,
    #[error("calibration points must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub sensor_id: SensorId,
    /// `(pressure, correction)` pairs the curve was fitted through.
    pub pressure_points: [(f64, f64); 3],
    pub quad_coeffs: QuadCoeffs,
}

impl CalibrationCurve {
    /// Zero correction at every pressure.
    pub fn identity(sensor_id: SensorId) -> Self {
        let pressure_points = CALIBRATION_PRESSURES.map(|p| (p, 0.0));
        Self {
            sensor_id,
            pressure_points,
            quad_coeffs: QuadCoeffs { a0: 0.0, a1: 0.0, a2: 0.0 },
        }
    }

    pub fn fit(sensor_id: SensorId, points: [(f64, f64); 3]) -> Result<Self, CalibrationError> {
        Ok(Self {
            sensor_id,
            pressure_points: points,
            quad_coeffs: fit_calibration(points)?,
        })
    }

    pub fn correction(&self, pressure: f64) -> f64 {
        let QuadCoeffs { a0, a1, a2 } = self.quad_coeffs;
        a0 + pressure * (a1 + pressure * a2)
    }

    pub fn apply(&self, raw: f64, pressure: f64) -> f64 {
        raw + self.correction(pressure)
    }
}

/// Solves the 3x3 Vandermonde system for the quadratic through `points`,
/// using Gaussian elimination with partial pivoting.
pub fn fit_calibration(points: [(f64, f64); 3]) -> Result<QuadCoeffs, CalibrationError> {
    if points.iter().any(|(p, c)| !p.is_finite() || !c.is_finite()) {
        return Err(CalibrationError::NonFinite);
    }
    let scale = points.iter().map(|(p, _)| p.abs()).fold(1.0, f64::max);
    for i in 0..3 {
        for j in i + 1..3 {
            if (points[i].0 - points[j].0).abs() <= 1e-12 * scale {
                return Err(CalibrationError::DegeneratePoints);
            }
        }
    }

    let mut m = [[0.0f64; 4]; 3];
    for (row, &(p, c)) in m.iter_mut().zip(points.iter()) {
        *row = [1.0, p, p * p, c];
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][3] - tail) / m[row][row];
    }
    Ok(QuadCoeffs { a0: x[0], a1: x[1], a2: x[2] })
}

/// Calibration curves for every chamber sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub curves: BTreeMap<SensorId, CalibrationCurve>,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            curves: SensorId::CHAMBER
                .into_iter()
                .map(|s| (s, CalibrationCurve::identity(s)))
                .collect(),
        }
    }
}

impl Calibration {
    pub fn curve(&self, sensor: SensorId) -> Option<&CalibrationCurve> {
        self.curves.get(&sensor)
    }

    pub fn correct(&self, sensor: SensorId, raw: f64, pressure: f64) -> f64 {
        match self.curve(sensor) {
            Some(c) => c.apply(raw, pressure),
            None => raw,
        }
    }

    /// Corrects a raw pressure reading. The correction depends on the true
    /// pressure, so the corrected value is found by fixed-point iteration
    /// starting from the raw reading.
    pub fn correct_pressure(&self, raw: f64) -> f64 {
        let Some(curve) = self.curve(SensorId::Pressure) else {
            return raw;
        };
        let mut p = raw;
        for _ in 0..6 {
            p = curve.apply(raw, p);
        }
        p
    }

    /// Bench procedure: hold the chamber at each calibration pressure, average
    /// `readings_per_point` raw readings per sensor and record the offset from
    /// the reference value.
    pub fn bench<R: Rng + ?Sized>(plant: &PlantSim, readings_per_point: usize, rng: &mut R) -> Self {
        let base = plant.initial_state();
        let mut curves = BTreeMap::new();
        for sensor in SensorId::CHAMBER {
            let mut points = [(0.0, 0.0); 3];
            for (slot, &p) in points.iter_mut().zip(CALIBRATION_PRESSURES.iter()) {
                let state = PlantState {
                    chamber_pressure: PressureBar(p),
                    ..base.clone()
                };
                let reference = plant.truth(&state, sensor);
                let n = readings_per_point.max(1);
                let mean_raw = (0..n)
                    .map(|_| plant.read_sensor(&state, sensor, rng).unwrap_or(reference))
                    .sum::<f64>()
                    / n as f64;
                *slot = (p, reference - mean_raw);
            }
            let curve = CalibrationCurve::fit(sensor, points)
                .expect("calibration pressures are distinct");
            curves.insert(sensor, curve);
        }
        Self { curves }
    }
}
