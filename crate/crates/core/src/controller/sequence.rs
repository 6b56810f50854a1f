//! Measurement sequence run while the chamber is held at pressure.
//!
//! After the stabilization period, one raw reading per chamber sensor is taken
//! on every controller tick until each sensor has `readings_per_sensor`
//! readings. Raw readings are averaged with a 95% confidence interval first;
//! the pressure correction and temperature compensation are then applied to
//! the means, and the result is checked against the sensor ranges.

use std::time::Duration;

use thiserror::Error;

use super::calibration::Calibration;
use super::compensation::{compensate_temperature, compensation_gain};
use super::stats::mean_ci95;
use crate::domain::{
    range_validate, BatchId, FlowDirection, MeasurementRecord, MonotonicMs, PanelValidity,
    PressureBar, SensorId, SensorPanel,
};
use crate::plant::SIM_TICK;

/// Allowed deviation from the pressure setpoint during the sequence.
pub const PRESSURE_BAND: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SequenceError {
    #[error("chamber pressure {0} outside setpoint band")]
    PressureOutOfBand(PressureBar),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("sensor {0} unavailable")]
pub struct SensorUnavailable(pub SensorId);

/// Raw reading access for the chamber sensors.
pub trait ChamberSource {
    fn read(&mut self, sensor: SensorId) -> Result<f64, SensorUnavailable>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceConfig {
    pub stabilization: Duration,
    pub readings_per_sensor: u32,
    pub setpoint: PressureBar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSummary {
    pub mean: SensorPanel,
    pub ci_halfwidth: SensorPanel,
    pub validity: PanelValidity,
    pub sample_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceStatus {
    Stabilizing,
    Collecting { collected: u32 },
    Done(PanelSummary),
    Aborted(SequenceError),
}

#[derive(Debug, Clone)]
pub struct MeasurementSequence {
    cfg: SequenceConfig,
    started_ms: MonotonicMs,
    raws: [Vec<f64>; 5],
    unavailable: [bool; 5],
    collected: u32,
    finished: bool,
}

fn slot(sensor: SensorId) -> usize {
    SensorId::CHAMBER.iter().position(|s| *s == sensor).expect("chamber sensor")
}

impl MeasurementSequence {
    pub fn new(cfg: SequenceConfig, started_ms: MonotonicMs) -> Self {
        let cap = cfg.readings_per_sensor as usize;
        Self {
            cfg,
            started_ms,
            raws: std::array::from_fn(|_| Vec::with_capacity(cap)),
            unavailable: [false; 5],
            collected: 0,
            finished: false,
        }
    }

    /// Advances the sequence by one controller tick. `pressure` is the
    /// corrected chamber pressure for this tick.
    pub fn on_tick(
        &mut self,
        now_ms: MonotonicMs,
        pressure: PressureBar,
        source: &mut dyn ChamberSource,
        calibration: &Calibration,
    ) -> SequenceStatus {
        if self.finished {
            return SequenceStatus::Collecting { collected: self.collected };
        }
        if (pressure.0 - self.cfg.setpoint.0).abs() > PRESSURE_BAND {
            self.finished = true;
            return SequenceStatus::Aborted(SequenceError::PressureOutOfBand(pressure));
        }
        let elapsed = Duration::from_millis(now_ms.saturating_sub(self.started_ms));
        if elapsed < self.cfg.stabilization {
            return SequenceStatus::Stabilizing;
        }
        for sensor in SensorId::CHAMBER {
            let i = slot(sensor);
            match source.read(sensor) {
                Ok(v) if v.is_finite() => self.raws[i].push(v),
                _ => self.unavailable[i] = true,
            }
        }
        self.collected += 1;
        if self.collected < self.cfg.readings_per_sensor {
            return SequenceStatus::Collecting { collected: self.collected };
        }
        self.finished = true;
        SequenceStatus::Done(summarize(&self.raws, &self.unavailable, self.collected, calibration))
    }
}

/// Averages raw readings and applies corrections to the means.
pub fn summarize(
    raws: &[Vec<f64>; 5],
    unavailable: &[bool; 5],
    sample_count: u32,
    calibration: &Calibration,
) -> PanelSummary {
    let mut mean = SensorPanel::default();
    let mut ci = SensorPanel::default();
    let mut available = PanelValidity::ALL_VALID;

    let stats = |sensor: SensorId| {
        let i = slot(sensor);
        if unavailable[i] {
            None
        } else {
            mean_ci95(&raws[i])
        }
    };

    let pressure = stats(SensorId::Pressure).map(|s| {
        (calibration.correct_pressure(s.mean), s.half_width)
    });
    let p_ref = pressure.map(|(p, _)| p).unwrap_or(0.0);
    match pressure {
        Some((p, hw)) => {
            mean.pressure = PressureBar(p);
            ci.pressure = PressureBar(hw);
        }
        None => available.pressure = false,
    }

    let corrected = |sensor: SensorId| {
        stats(sensor).map(|s| (calibration.correct(sensor, s.mean, p_ref), s.half_width))
    };

    let temperature = corrected(SensorId::Temperature);
    for sensor in [SensorId::DissolvedO2, SensorId::Temperature] {
        match corrected(sensor) {
            Some((m, hw)) => {
                mean.set(sensor, m);
                ci.set(sensor, hw);
            }
            None => available.set(sensor, false),
        }
    }

    for sensor in [SensorId::Ph, SensorId::Conductivity] {
        match (corrected(sensor), temperature) {
            (Some((m, hw)), Some((t, _))) => {
                let gain = compensation_gain(sensor, t).expect("compensated sensor");
                mean.set(sensor, compensate_temperature(sensor, m, t).expect("compensated sensor"));
                ci.set(sensor, hw * gain.abs());
            }
            // No usable temperature means no compensation, so the field is
            // reported but flagged.
            (Some((m, hw)), None) => {
                mean.set(sensor, m);
                ci.set(sensor, hw);
                available.set(sensor, false);
            }
            (None, _) => available.set(sensor, false),
        }
    }

    let validity = available.and(range_validate(&mean));
    PanelSummary {
        mean,
        ci_halfwidth: ci,
        validity,
        sample_count,
    }
}

impl PanelSummary {
    pub fn into_record(
        self,
        batch_id: BatchId,
        cycle_index: u64,
        flow_direction: FlowDirection,
        controller_timestamp: MonotonicMs,
    ) -> MeasurementRecord {
        MeasurementRecord {
            batch_id,
            cycle_index,
            flow_direction,
            panel_mean: self.mean,
            panel_ci_halfwidth: self.ci_halfwidth,
            sample_count: self.sample_count,
            valid: self.validity.all(),
            validity: self.validity,
            controller_timestamp,
            server_timestamp: None,
        }
    }
}

/// Runs a complete sequence against `source` on a synthetic clock advancing
/// one controller tick at a time. The chamber pressure is read from the
/// source on every tick.
pub fn run_measurement_sequence(
    source: &mut dyn ChamberSource,
    cfg: SequenceConfig,
    calibration: &Calibration,
) -> Result<PanelSummary, SequenceError> {
    let tick = SIM_TICK.as_millis() as u64;
    let mut seq = MeasurementSequence::new(cfg, 0);
    let mut now = 0;
    loop {
        // An unavailable pressure sensor reads as out of band.
        let p = source
            .read(SensorId::Pressure)
            .map(|raw| calibration.correct_pressure(raw))
            .unwrap_or(f64::NAN);
        match seq.on_tick(now, PressureBar(p), source, calibration) {
            SequenceStatus::Done(summary) => return Ok(summary),
            SequenceStatus::Aborted(err) => return Err(err),
            SequenceStatus::Stabilizing | SequenceStatus::Collecting { .. } => {}
        }
        now += tick;
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use super::*;
    use crate::controller::calibration::CalibrationCurve;

    /// Replays scripted readings per sensor; pressure is fixed.
    struct Script {
        pressure: f64,
        values: [VecDeque<f64>; 5],
        fallback: [f64; 5],
        failed: Option<SensorId>,
    }

    impl Script {
        fn constant(p: f64) -> Self {
            Self {
                pressure: p,
                values: Default::default(),
                fallback: [8.0, 5.0, 1500.0, 25.0, p],
                failed: None,
            }
        }
    }

    impl ChamberSource for Script {
        fn read(&mut self, sensor: SensorId) -> Result<f64, SensorUnavailable> {
            if Some(sensor) == self.failed {
                return Err(SensorUnavailable(sensor));
            }
            let i = slot(sensor);
            if sensor == SensorId::Pressure && self.values[i].is_empty() {
                return Ok(self.pressure);
            }
            Ok(self.values[i].pop_front().unwrap_or(self.fallback[i]))
        }
    }

    fn cfg() -> SequenceConfig {
        SequenceConfig {
            stabilization: Duration::from_secs(30),
            readings_per_sensor: 10,
            setpoint: PressureBar(7.0),
        }
    }

    #[test]
    fn identical_readings_zero_width() {
        let mut src = Script::constant(7.0);
        let s = run_measurement_sequence(&mut src, cfg(), &Calibration::default()).unwrap();
        assert_eq!(s.mean.pressure, PressureBar(7.0));
        assert_eq!(s.ci_halfwidth.pressure, PressureBar(0.0));
        assert_eq!(s.sample_count, 10);
        assert!(s.validity.all());
    }

    #[test]
    fn dissolved_oxygen_one_to_ten() {
        let mut src = Script::constant(7.0);
        src.values[slot(SensorId::DissolvedO2)] = (1..=10).map(f64::from).collect();
        let s = run_measurement_sequence(&mut src, cfg(), &Calibration::default()).unwrap();
        assert!((s.mean.dissolved_o2 - 5.5).abs() < 1e-12);
        assert!((s.ci_halfwidth.dissolved_o2 - 2.165851).abs() < 1e-5);
    }

    #[test]
    fn pressure_correction_applied_to_mean() {
        let mut cal = Calibration::default();
        cal.curves.insert(
            SensorId::Pressure,
            CalibrationCurve::fit(SensorId::Pressure, [(0.0, -0.15), (3.5, -0.15), (7.0, -0.15)]).unwrap(),
        );
        let mut src = Script::constant(7.15);
        let s = run_measurement_sequence(&mut src, cfg(), &cal).unwrap();
        assert!((s.mean.pressure.0 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn failed_sensor_flags_field_but_still_reports() {
        let mut src = Script::constant(7.0);
        src.failed = Some(SensorId::Ph);
        let s = run_measurement_sequence(&mut src, cfg(), &Calibration::default()).unwrap();
        assert!(!s.validity.ph);
        assert!(s.validity.dissolved_o2 && s.validity.temperature);
        let r = s.into_record(BatchId::new("b"), 0, FlowDirection::Forward, 0);
        assert!(!r.valid);
        r.check_invariants().unwrap();
    }

    #[test]
    fn out_of_band_pressure_aborts() {
        let mut src = Script::constant(6.5);
        assert_eq!(
            run_measurement_sequence(&mut src, cfg(), &Calibration::default()),
            Err(SequenceError::PressureOutOfBand(PressureBar(6.5)))
        );
    }

    #[test]
    fn compensates_ph_with_measured_temperature() {
        let mut src = Script::constant(7.0);
        src.fallback[slot(SensorId::Temperature)] = 15.0;
        src.fallback[slot(SensorId::Ph)] = 5.0;
        let s = run_measurement_sequence(&mut src, cfg(), &Calibration::default()).unwrap();
        let expected = compensate_temperature(SensorId::Ph, 5.0, 15.0).unwrap();
        assert!((s.mean.ph - expected).abs() < 1e-12);
    }

    #[test]
    fn stabilization_precedes_collection() {
        let mut src = Script::constant(7.0);
        let cal = Calibration::default();
        let mut seq = MeasurementSequence::new(cfg(), 1_000);
        assert_eq!(seq.on_tick(30_900, PressureBar(7.0), &mut src, &cal), SequenceStatus::Stabilizing);
        assert_eq!(
            seq.on_tick(31_000, PressureBar(7.0), &mut src, &cal),
            SequenceStatus::Collecting { collected: 1 }
        );
    }
}
