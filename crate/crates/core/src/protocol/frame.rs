use serde::{Deserialize, Serialize};

use crate::controller::{CycleCounter, SamplingState, TransitionReason};
use crate::domain::{
    BatchId, CommandEnvelope, CommandId, FlowDirection, HydrometerReading, MeasurementRecord,
    MonotonicMs, PressureBar, WallMs,
};

/// Controller to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Starts at 1 on every boot.
    pub seq: u64,
    pub boot_id: u32,
    pub controller_time_ms: MonotonicMs,
    pub body: FrameBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum FrameBody {
    Measurement(Measurement),
    Heartbeat(Heartbeat),
    StateChange(StateChange),
    /// Operator acknowledgment entered at the rig console.
    AlertAck { alert_id: u64 },
    /// Console command or console confirmation of a pending command; the
    /// envelope origin is `Physical`.
    Command(CommandEnvelope),
    CommandResult(CommandResult),
}

impl FrameBody {
    pub fn kind(&self) -> &'static str {
        match self {
            FrameBody::Measurement(_) => "measurement",
            FrameBody::Heartbeat(_) => "heartbeat",
            FrameBody::StateChange(_) => "state_change",
            FrameBody::AlertAck { .. } => "alert_ack",
            FrameBody::Command(_) => "command",
            FrameBody::CommandResult(_) => "command_result",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Measurement {
    Panel { record: MeasurementRecord },
    Hydrometer { batch_id: BatchId, reading: HydrometerReading },
}

impl Measurement {
    pub fn batch_id(&self) -> &BatchId {
        match self {
            Measurement::Panel { record } => &record.batch_id,
            Measurement::Hydrometer { batch_id, .. } => batch_id,
        }
    }
}

/// Probe timestamps echoed back for offset estimation. `t1` is the server
/// send time, `t2` the controller receive time; the enclosing frame's
/// `controller_time_ms` is `t3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeEcho {
    pub t1: WallMs,
    pub t2: MonotonicMs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heartbeat {
    pub batch_id: BatchId,
    pub state: SamplingState,
    pub pressure: PressureBar,
    pub counter: CycleCounter,
    pub cycles_completed: u64,
    pub paused: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo: Option<ProbeEcho>,
    /// Lowest sequence number still held for replay.
    pub oldest_buffered: u64,
    /// Frames discarded by the full outbound buffer since boot.
    pub buffer_dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateChange {
    pub batch_id: BatchId,
    pub from: SamplingState,
    pub to: SamplingState,
    pub reason: TransitionReason,
    pub pressure: PressureBar,
    pub flow_direction: FlowDirection,
    pub cycles_completed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CommandOutcome {
    Executed,
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandResult {
    pub command_id: CommandId,
    #[serde(flatten)]
    pub outcome: CommandOutcome,
}

/// Server to controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownFrame {
    pub seq: u64,
    pub server_time_ms: WallMs,
    pub body: DownBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum DownBody {
    /// Liveness probe. `server_time_ms` of the enclosing frame is `t1`.
    Heartbeat {
        /// Boot the acknowledgment refers to.
        boot_id: u32,
        /// Highest contiguous uplink sequence number stored; 0 for none.
        acked_seq: u64,
    },
    Command(CommandEnvelope),
}
