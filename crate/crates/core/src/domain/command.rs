use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{PressureBar, WallMs};

/// Authorization tier of a command. Ordered `Standard < Limited < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyLevel {
    Standard,
    Limited,
    Critical,
}

/// Where a command was entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Through the twin (HTTP API, dashboard, automation on the server).
    Remote,
    /// From the console at the rig.
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confirmation {
    Digital,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommandId(pub u64);

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cmd-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "args", rename_all = "snake_case")]
pub enum CommandKind {
    SetSamplingInterval { interval_ms: u64 },
    RequestSampleCycle,
    PauseSampling,
    ResumeSampling,
    ManualDepressurize,
    OverridePressureLimit { limit: PressureBar },
    EmergencyStop,
    /// Clears a latched emergency shutdown.
    ResetEmergencyShutdown,
}

impl CommandKind {
    /// The authorization tier is a pure function of the kind.
    pub fn level(&self) -> SafetyLevel {
        match self {
            CommandKind::SetSamplingInterval { .. }
            | CommandKind::RequestSampleCycle
            | CommandKind::PauseSampling
            | CommandKind::ResumeSampling
            | CommandKind::EmergencyStop => SafetyLevel::Standard,
            CommandKind::ManualDepressurize | CommandKind::ResetEmergencyShutdown => {
                SafetyLevel::Limited
            }
            CommandKind::OverridePressureLimit { .. } => SafetyLevel::Critical,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::SetSamplingInterval { .. } => "set_sampling_interval",
            CommandKind::RequestSampleCycle => "request_sample_cycle",
            CommandKind::PauseSampling => "pause_sampling",
            CommandKind::ResumeSampling => "resume_sampling",
            CommandKind::ManualDepressurize => "manual_depressurize",
            CommandKind::OverridePressureLimit { .. } => "override_pressure_limit",
            CommandKind::EmergencyStop => "emergency_stop",
            CommandKind::ResetEmergencyShutdown => "reset_emergency_shutdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEnvelope {
    pub command_id: CommandId,
    #[serde(flatten)]
    pub kind: CommandKind,
    pub level: SafetyLevel,
    pub origin: Origin,
    #[serde(default)]
    pub confirmations: BTreeSet<Confirmation>,
    pub issued_at: WallMs,
}

impl CommandEnvelope {
    pub fn new(command_id: CommandId, kind: CommandKind, origin: Origin, issued_at: WallMs) -> Self {
        let level = kind.level();
        Self {
            command_id,
            kind,
            level,
            origin,
            confirmations: BTreeSet::new(),
            issued_at,
        }
    }

    pub fn with_confirmation(mut self, c: Confirmation) -> Self {
        self.confirmations.insert(c);
        self
    }

    /// An envelope is well formed when its declared level matches its kind.
    pub fn is_well_formed(&self) -> bool {
        self.level == self.kind.level()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::codec;

    #[test]
    fn levels_are_totally_ordered() {
        use SafetyLevel::*;
        let all = [Standard, Limited, Critical];
        for a in all {
            for b in all {
                for c in all {
                    if a <= b && b <= c {
                        assert!(a <= c);
                    }
                }
                assert!(a <= b || b <= a);
            }
        }
        assert!(Standard < Limited && Limited < Critical);
    }

    #[test]
    fn envelope_wire_shape() {
        let env = CommandEnvelope::new(
            CommandId(7),
            CommandKind::SetSamplingInterval { interval_ms: 10_000 },
            Origin::Remote,
            1_000,
        )
        .with_confirmation(Confirmation::Digital);
        let s = codec::to_string(&env).unwrap();
        assert_eq!(
            s,
            r#"{"command_id":7,"kind":"set_sampling_interval","args":{"interval_ms":10000},"level":"standard","origin":"remote","confirmations":["digital"],"issued_at":1000}"#
        );
        let back: CommandEnvelope = codec::from_str(&s).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn unit_kinds_have_no_args() {
        let env = CommandEnvelope::new(CommandId(1), CommandKind::EmergencyStop, Origin::Physical, 0);
        let s = codec::to_string(&env).unwrap();
        assert!(s.contains(r#""kind":"emergency_stop""#));
        assert!(!s.contains("args"));
        assert_eq!(codec::from_str::<CommandEnvelope>(&s).unwrap(), env);
    }
}
