//! Controller/server wire protocol.
//!
//! Frames travel as newline-delimited JSON in the canonical encoding. Uplink
//! frames (controller to server) carry a per-boot sequence number and the
//! controller's monotonic time; downlink frames carry the server's wall
//! clock. The controller keeps every uplink frame until the server
//! acknowledges it and replays unacknowledged frames in order after a
//! connection loss.

mod buffer;
mod frame;
mod line;
mod link;

pub use buffer::{OutboundBuffer, DEFAULT_BUFFER_CAPACITY, RESEND_AFTER};
pub use frame::{
    CommandOutcome, CommandResult, DownBody, DownFrame, Frame, FrameBody, Heartbeat, Measurement,
    ProbeEcho, StateChange,
};
pub use line::{decode_line, encode_line, LineReader};
pub use link::{Direction, LinkParams, SimLink};
