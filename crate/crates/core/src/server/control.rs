//! Command authorization and the pending-confirmation workflow.
//!
//! | level    | kinds                                             | rule                                  |
//! |----------|---------------------------------------------------|---------------------------------------|
//! | Standard | interval, request cycle, pause, resume, e-stop    | execute from any origin                |
//! | Limited  | manual depressurize, reset emergency shutdown     | needs Digital and Physical            |
//! | Critical | override pressure limit                           | origin must be Physical, else reject  |
//!
//! A remote envelope cannot carry a Physical confirmation; one claimed over
//! the network is ignored. A Physical origin counts as Physical confirmation.
//! Emergency stop is executed unconditionally.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::SamplingState;
use crate::domain::{
    CommandEnvelope, CommandId, CommandKind, Confirmation, Origin, PressureBar, SafetyLevel, WallMs,
    MAX_SAMPLING_INTERVAL, MIN_SAMPLING_INTERVAL,
};

pub const PENDING_WINDOW: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Authorization {
    Execute,
    Pending { needed: BTreeSet<Confirmation> },
    Reject { reason: String },
}

/// Confirmations that count for `env`, after discounting what its origin
/// cannot vouch for.
pub fn effective_confirmations(env: &CommandEnvelope) -> BTreeSet<Confirmation> {
    let mut set = env.confirmations.clone();
    match env.origin {
        Origin::Remote => {
            set.remove(&Confirmation::Physical);
        }
        Origin::Physical => {
            set.insert(Confirmation::Physical);
        }
    }
    set
}

pub fn authorize(env: &CommandEnvelope) -> Authorization {
    if env.kind == CommandKind::EmergencyStop {
        return Authorization::Execute;
    }
    if !env.is_well_formed() {
        return Authorization::Reject {
            reason: "declared level does not match command kind".into(),
        };
    }
    match env.kind.level() {
        SafetyLevel::Standard => Authorization::Execute,
        SafetyLevel::Limited => {
            let have = effective_confirmations(env);
            let needed: BTreeSet<_> = [Confirmation::Digital, Confirmation::Physical]
                .into_iter()
                .filter(|c| !have.contains(c))
                .collect();
            if needed.is_empty() {
                Authorization::Execute
            } else {
                Authorization::Pending { needed }
            }
        }
        SafetyLevel::Critical => match env.origin {
            Origin::Physical => Authorization::Execute,
            Origin::Remote => Authorization::Reject {
                reason: "critical command requires physical presence".into(),
            },
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum CommandError {
    #[error("argument out of bounds: {0}")]
    ArgOutOfBounds(String),
    #[error("conflicts with safety state: {0}")]
    ConflictsWithSafetyState(String),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("confirmation window expired")]
    Expired,
    #[error("unknown command {0}")]
    UnknownCommand(CommandId),
    #[error("command {0} is not awaiting confirmation")]
    NotPending(CommandId),
}

/// What the validator needs to know about the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyContext {
    pub state: Option<SamplingState>,
    pub pressure_setpoint: PressureBar,
    pub relief_threshold: PressureBar,
}

pub fn validate_command(env: &CommandEnvelope, ctx: &SafetyContext) -> Result<(), CommandError> {
    let latched = ctx.state == Some(SamplingState::EmergencyShutdown);
    match &env.kind {
        CommandKind::EmergencyStop => Ok(()),
        CommandKind::SetSamplingInterval { interval_ms } => {
            let d = Duration::from_millis(*interval_ms);
            if d < MIN_SAMPLING_INTERVAL || d > MAX_SAMPLING_INTERVAL {
                Err(CommandError::ArgOutOfBounds(format!(
                    "interval {interval_ms} ms outside [{}, {}] ms",
                    MIN_SAMPLING_INTERVAL.as_millis(),
                    MAX_SAMPLING_INTERVAL.as_millis()
                )))
            } else {
                Ok(())
            }
        }
        CommandKind::OverridePressureLimit { limit } => {
            if !limit.is_physical()
                || limit.0 <= ctx.pressure_setpoint.0
                || limit.0 >= ctx.relief_threshold.0
            {
                Err(CommandError::ArgOutOfBounds(format!(
                    "limit {limit} must lie strictly between setpoint {} and relief {}",
                    ctx.pressure_setpoint, ctx.relief_threshold
                )))
            } else {
                Ok(())
            }
        }
        CommandKind::ResumeSampling | CommandKind::RequestSampleCycle if latched => Err(
            CommandError::ConflictsWithSafetyState("emergency shutdown is latched".into()),
        ),
        CommandKind::ResetEmergencyShutdown
            if !ctx.state.is_some_and(SamplingState::is_safety_state) =>
        {
            Err(CommandError::ConflictsWithSafetyState("controller is not in a safety state".into()))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingCommand {
    pub envelope: CommandEnvelope,
    pub required_confirmations: BTreeSet<Confirmation>,
    pub received_confirmations: BTreeSet<Confirmation>,
    pub expires_at: WallMs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CommandStatus {
    /// Authorized and sent to the controller.
    Dispatched,
    Pending { needed: BTreeSet<Confirmation>, expires_at: WallMs },
    Rejected { reason: String },
    Expired,
    /// Controller confirmed execution.
    Completed,
    /// Controller refused.
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub envelope: CommandEnvelope,
    #[serde(flatten)]
    pub status: CommandStatus,
    pub updated_at: WallMs,
}

/// Authorization state across commands.
#[derive(Debug, Clone, Default)]
pub struct ControlService {
    records: BTreeMap<CommandId, CommandRecord>,
    pending: BTreeMap<CommandId, PendingCommand>,
    next_id: u64,
}

/// Result of a submission or confirmation: the record plus the envelope to
/// dispatch, if it was authorized.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub record: CommandRecord,
    pub dispatch: Option<CommandEnvelope>,
}

impl ControlService {
    pub fn next_id(&mut self) -> CommandId {
        self.next_id += 1;
        CommandId(self.next_id)
    }

    pub fn contains(&self, id: CommandId) -> bool {
        self.records.contains_key(&id)
    }

    pub fn submit(&mut self, env: CommandEnvelope, ctx: &SafetyContext, now: WallMs) -> Decision {
        let auth = authorize(&env);
        let (status, dispatch) = match auth {
            Authorization::Reject { reason } => (CommandStatus::Rejected { reason }, None),
            Authorization::Execute => match validate_command(&env, ctx) {
                Ok(()) => (CommandStatus::Dispatched, Some(env.clone())),
                Err(e) => (CommandStatus::Rejected { reason: e.to_string() }, None),
            },
            Authorization::Pending { needed } => match validate_command(&env, ctx) {
                Ok(()) => {
                    let expires_at = now + PENDING_WINDOW.as_millis() as WallMs;
                    self.pending.insert(
                        env.command_id,
                        PendingCommand {
                            envelope: env.clone(),
                            required_confirmations: [Confirmation::Digital, Confirmation::Physical].into(),
                            received_confirmations: effective_confirmations(&env),
                            expires_at,
                        },
                    );
                    (CommandStatus::Pending { needed, expires_at }, None)
                }
                Err(e) => (CommandStatus::Rejected { reason: e.to_string() }, None),
            },
        };
        let record = CommandRecord {
            envelope: env.clone(),
            status,
            updated_at: now,
        };
        self.records.insert(env.command_id, record.clone());
        Decision { record, dispatch }
    }

    /// Adds confirmations from `origin` to a pending command. Physical can
    /// only come from a Physical origin.
    pub fn confirm(
        &mut self,
        id: CommandId,
        origin: Origin,
        confirmations: &BTreeSet<Confirmation>,
        ctx: &SafetyContext,
        now: WallMs,
    ) -> Result<Decision, CommandError> {
        self.expire(now);
        let Some(record) = self.records.get(&id) else {
            return Err(CommandError::UnknownCommand(id));
        };
        if record.status == CommandStatus::Expired {
            return Err(CommandError::Expired);
        }
        let Some(p) = self.pending.get_mut(&id) else {
            return Err(CommandError::NotPending(id));
        };
        let probe = CommandEnvelope {
            origin,
            confirmations: confirmations.clone(),
            ..p.envelope.clone()
        };
        p.received_confirmations.extend(effective_confirmations(&probe));
        let mut merged = p.envelope.clone();
        merged.confirmations = p.received_confirmations.clone();
        if origin == Origin::Physical {
            merged.origin = Origin::Physical;
        }
        let missing: BTreeSet<_> = p
            .required_confirmations
            .difference(&p.received_confirmations)
            .copied()
            .collect();
        let expires_at = p.expires_at;
        let (status, dispatch) = if missing.is_empty() {
            self.pending.remove(&id);
            match validate_command(&merged, ctx) {
                Ok(()) => (CommandStatus::Dispatched, Some(merged.clone())),
                Err(e) => (CommandStatus::Rejected { reason: e.to_string() }, None),
            }
        } else {
            (CommandStatus::Pending { needed: missing, expires_at }, None)
        };
        let record = CommandRecord {
            envelope: merged,
            status,
            updated_at: now,
        };
        self.records.insert(id, record.clone());
        Ok(Decision { record, dispatch })
    }

    /// Expires pending commands whose window has passed.
    pub fn expire(&mut self, now: WallMs) -> Vec<CommandId> {
        let expired: Vec<CommandId> = self
            .pending
            .iter()
            .filter(|(_, p)| now >= p.expires_at)
            .map(|(id, _)| *id)
            .collect();
        for id in &expired {
            self.pending.remove(id);
            if let Some(r) = self.records.get_mut(id) {
                r.status = CommandStatus::Expired;
                r.updated_at = now;
            }
        }
        expired
    }

    /// Records the controller's verdict.
    pub fn complete(&mut self, id: CommandId, failure: Option<String>, now: WallMs) {
        if let Some(r) = self.records.get_mut(&id) {
            r.status = match failure {
                None => CommandStatus::Completed,
                Some(reason) => CommandStatus::Failed { reason },
            };
            r.updated_at = now;
        }
    }

    pub fn get(&self, id: CommandId) -> Option<&CommandRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &CommandRecord> {
        self.records.values()
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingCommand> {
        self.pending.values()
    }
}
