use thiserror::Error;

use crate::domain::SensorId;

/// Reference temperature for compensated values.
pub const REFERENCE_TEMP_C: f64 = 25.0;
/// Linear conductivity temperature coefficient, 2 %/°C.
pub const CONDUCTIVITY_ALPHA: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("temperature compensation not defined for {0}")]
pub struct UnsupportedSensor(pub SensorId);

/// Normalizes a pH or conductivity reading to 25 °C.
///
/// pH uses the Nernst slope ratio around the isopotential point pH 7;
/// conductivity uses the linear 2 %/°C model.
pub fn compensate_temperature(sensor: SensorId, raw: f64, temp_c: f64) -> Result<f64, UnsupportedSensor> {
    let gain = compensation_gain(sensor, temp_c)?;
    Ok(match sensor {
        SensorId::Ph => 7.0 + (raw - 7.0) * gain,
        _ => raw * gain,
    })
}

/// d(compensated)/d(raw), used to carry a confidence interval through the
/// compensation.
pub fn compensation_gain(sensor: SensorId, temp_c: f64) -> Result<f64, UnsupportedSensor> {
    match sensor {
        SensorId::Ph => Ok(298.15 / (temp_c + 273.15)),
        SensorId::Conductivity => Ok(1.0 / (1.0 + CONDUCTIVITY_ALPHA * (temp_c - REFERENCE_TEMP_C))),
        other => Err(UnsupportedSensor(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ph_identity_at_reference() {
        assert_eq!(compensate_temperature(SensorId::Ph, 6.8, 25.0).unwrap(), 6.8);
    }

    #[test]
    fn conductivity_examples() {
        let warm = compensate_temperature(SensorId::Conductivity, 1100.0, 30.0).unwrap();
        assert!((warm - 1000.0).abs() < 1e-9, "{warm}");
        let cool = compensate_temperature(SensorId::Conductivity, 900.0, 20.0).unwrap();
        assert!((cool - 1000.0).abs() < 1e-9, "{cool}");
    }

    #[test]
    fn ph_slope_pivots_on_seven() {
        assert_eq!(compensate_temperature(SensorId::Ph, 7.0, 5.0).unwrap(), 7.0);
        let cold = compensate_temperature(SensorId::Ph, 5.0, 15.0).unwrap();
        assert!((cold - (7.0 - 2.0 * 298.15 / 288.15)).abs() < 1e-12);
    }

    #[test]
    fn other_sensors_unsupported() {
        assert_eq!(
            compensate_temperature(SensorId::DissolvedO2, 8.0, 20.0),
            Err(UnsupportedSensor(SensorId::DissolvedO2))
        );
    }
}
