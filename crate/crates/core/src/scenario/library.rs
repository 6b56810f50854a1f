use super::model::{Scenario, ScenarioError};

const SOURCES: [(&str, &str); 6] = [
    ("nominal_batch", include_str!("../../scenarios/nominal_batch.json")),
    ("pressure_spike", include_str!("../../scenarios/pressure_spike.json")),
    ("stuck_vent", include_str!("../../scenarios/stuck_vent.json")),
    ("power_loss_pressurizing", include_str!("../../scenarios/power_loss_pressurizing.json")),
    ("sensor_failure_ph", include_str!("../../scenarios/sensor_failure_ph.json")),
    ("network_partition_catchup", include_str!("../../scenarios/network_partition_catchup.json")),
];

pub const BUNDLED_NAMES: [&str; 6] = [
    SOURCES[0].0,
    SOURCES[1].0,
    SOURCES[2].0,
    SOURCES[3].0,
    SOURCES[4].0,
    SOURCES[5].0,
];

/// Every scenario shipped with the crate.
pub fn bundled() -> Vec<Scenario> {
    SOURCES
        .iter()
        .map(|(name, src)| Scenario::from_json(src).unwrap_or_else(|e| panic!("bundled {name}: {e}")))
        .collect()
}

pub fn bundled_named(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, src) = SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::Unknown(name.to_owned()))?;
    Scenario::from_json(src)
}
