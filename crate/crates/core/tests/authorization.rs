//! Exhaustive enumeration of the authorization model: every command kind,
//! origin, confirmation set, declared level and controller state, then every
//! follow-up confirmation of whatever is left pending.

use std::collections::BTreeSet;

use fermtwin_core::controller::SamplingState;
use fermtwin_core::domain::{CommandEnvelope, CommandId, CommandKind, Confirmation, Origin, SafetyLevel};
use fermtwin_core::server::{
    authorize, Authorization, CommandStatus, ControlService, SafetyContext, ServerConfig, TwinServer,
};
use fermtwin_core::PressureBar;

const ORIGINS: [Origin; 2] = [Origin::Remote, Origin::Physical];
const LEVELS: [SafetyLevel; 3] = [SafetyLevel::Standard, SafetyLevel::Limited, SafetyLevel::Critical];

fn kinds() -> Vec<CommandKind> {
    vec![
        CommandKind::SetSamplingInterval { interval_ms: 60_000 },
        CommandKind::SetSamplingInterval { interval_ms: 1_000 },
        CommandKind::RequestSampleCycle,
        CommandKind::PauseSampling,
        CommandKind::ResumeSampling,
        CommandKind::ManualDepressurize,
        CommandKind::OverridePressureLimit { limit: PressureBar(8.5) },
        CommandKind::OverridePressureLimit { limit: PressureBar(12.0) },
        CommandKind::EmergencyStop,
        CommandKind::ResetEmergencyShutdown,
    ]
}

fn confirmation_sets() -> Vec<BTreeSet<Confirmation>> {
    let all = [Confirmation::Digital, Confirmation::Physical];
    (0..4u8)
        .map(|mask| all.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| *c).collect())
        .collect()
}

fn contexts() -> Vec<SafetyContext> {
    std::iter::once(None)
        .chain(SamplingState::ALL.into_iter().map(Some))
        .map(|state| SafetyContext {
            state,
            pressure_setpoint: PressureBar(7.0),
            relief_threshold: PressureBar(10.0),
        })
        .collect()
}

struct Case {
    kind: CommandKind,
    origin: Origin,
    confirmations: BTreeSet<Confirmation>,
    level: SafetyLevel,
    ctx: SafetyContext,
}

fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    for kind in kinds() {
        for origin in ORIGINS {
            for confirmations in confirmation_sets() {
                for level in LEVELS {
                    for ctx in contexts() {
                        out.push(Case {
                            kind: kind.clone(),
                            origin,
                            confirmations: confirmations.clone(),
                            level,
                            ctx,
                        });
                    }
                }
            }
        }
    }
    out
}

fn envelope(c: &Case) -> CommandEnvelope {
    let mut env = CommandEnvelope::new(CommandId(1), c.kind.clone(), c.origin, 1_000);
    env.confirmations = c.confirmations.clone();
    env.level = c.level;
    env
}

#[test]
fn case_space_is_complete() {
    assert_eq!(cases().len(), 10 * 2 * 4 * 3 * 9);
}

#[test]
fn remote_critical_never_executes() {
    for c in cases() {
        let mut svc = ControlService::default();
        let decision = svc.submit(envelope(&c), &c.ctx, 1_000);
        let mut dispatched: Vec<CommandEnvelope> = decision.dispatch.into_iter().collect();
        if let CommandStatus::Pending { .. } = decision.record.status {
            for origin in ORIGINS {
                for set in confirmation_sets() {
                    let mut fork = svc.clone();
                    let d = fork.confirm(CommandId(1), origin, &set, &c.ctx, 2_000).expect("pending");
                    dispatched.extend(d.dispatch);
                }
            }
        }
        for env in dispatched {
            if env.kind.level() == SafetyLevel::Critical {
                assert_eq!(c.origin, Origin::Physical, "remote critical dispatched: {:?}", c.kind);
                assert_eq!(env.origin, Origin::Physical);
            }
        }
        if c.origin == Origin::Remote && c.kind.level() == SafetyLevel::Critical {
            assert!(matches!(decision.record.status, CommandStatus::Rejected { .. }));
        }
    }
}

#[test]
fn emergency_stop_always_dispatches() {
    for c in cases().into_iter().filter(|c| c.kind == CommandKind::EmergencyStop) {
        assert_eq!(authorize(&envelope(&c)), Authorization::Execute);
        let mut svc = ControlService::default();
        let d = svc.submit(envelope(&c), &c.ctx, 1_000);
        assert_eq!(d.record.status, CommandStatus::Dispatched, "{:?} {:?}", c.origin, c.ctx.state);
        assert!(d.dispatch.is_some());
    }
}

#[test]
fn limited_needs_both_confirmations() {
    for c in cases().into_iter().filter(|c| c.kind.level() == SafetyLevel::Limited && c.level == SafetyLevel::Limited) {
        let digital = c.confirmations.contains(&Confirmation::Digital);
        let physical = c.origin == Origin::Physical;
        match authorize(&envelope(&c)) {
            Authorization::Execute => assert!(digital && physical),
            Authorization::Pending { needed } => {
                assert_eq!(needed.contains(&Confirmation::Digital), !digital);
                assert_eq!(needed.contains(&Confirmation::Physical), !physical);
            }
            Authorization::Reject { reason } => panic!("well-formed limited command rejected: {reason}"),
        }
    }
}

#[test]
fn remote_confirmation_cannot_supply_physical_presence() {
    for c in cases().into_iter().filter(|c| c.kind.level() == SafetyLevel::Limited && c.origin == Origin::Remote) {
        let mut svc = ControlService::default();
        let d = svc.submit(envelope(&c), &c.ctx, 1_000);
        if !matches!(d.record.status, CommandStatus::Pending { .. }) {
            continue;
        }
        for set in confirmation_sets() {
            let mut fork = svc.clone();
            let d = fork.confirm(CommandId(1), Origin::Remote, &set, &c.ctx, 2_000).expect("pending");
            assert!(d.dispatch.is_none());
            assert!(matches!(d.record.status, CommandStatus::Pending { .. }));
        }
    }
}

#[test]
fn standard_executes_when_valid() {
    for c in cases().into_iter().filter(|c| c.kind.level() == SafetyLevel::Standard && c.level == SafetyLevel::Standard) {
        assert_eq!(authorize(&envelope(&c)), Authorization::Execute);
    }
}

#[test]
fn mislabelled_levels_are_rejected() {
    for c in cases()
        .into_iter()
        .filter(|c| c.level != c.kind.level() && c.kind != CommandKind::EmergencyStop)
    {
        assert!(matches!(authorize(&envelope(&c)), Authorization::Reject { .. }), "{:?} as {:?}", c.kind, c.level);
    }
}

#[test]
fn server_api_enforces_the_same_model() {
    for kind in kinds() {
        for set in confirmation_sets() {
            let server = TwinServer::new(ServerConfig::default());
            let rec = server.submit_command(kind.clone(), set.clone(), 1_000);
            assert_eq!(rec.envelope.origin, Origin::Remote);
            match kind.level() {
                SafetyLevel::Critical => assert!(matches!(rec.status, CommandStatus::Rejected { .. })),
                _ if kind == CommandKind::EmergencyStop => assert_eq!(rec.status, CommandStatus::Dispatched),
                _ => {}
            }
            let sent = server.take_downlink();
            if kind.level() == SafetyLevel::Critical {
                assert!(sent.is_empty(), "critical command reached the downlink");
            }
        }
    }
}
