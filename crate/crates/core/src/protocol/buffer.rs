use std::collections::VecDeque;
use std::time::Duration;

use super::frame::{Frame, FrameBody};
use crate::domain::MonotonicMs;

pub const DEFAULT_BUFFER_CAPACITY: usize = 100_000;

/// Unacknowledged frames older than this are sent again.
pub const RESEND_AFTER: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
struct Slot {
    frame: Frame,
    sent_at: Option<MonotonicMs>,
}

/// Store-and-forward queue on the controller side.
///
/// Frames stay queued until acknowledged. When the oldest unacknowledged
/// frame has gone unanswered for [`RESEND_AFTER`], the send cursor rewinds so
/// everything still queued goes out again in original order ahead of newer
/// frames. When full, the oldest frame is discarded and counted.
#[derive(Debug, Clone)]
pub struct OutboundBuffer {
    boot_id: u32,
    capacity: usize,
    slots: VecDeque<Slot>,
    cursor: usize,
    next_seq: u64,
    dropped: u64,
    resend_after_ms: u64,
}

impl OutboundBuffer {
    pub fn new(boot_id: u32, capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            boot_id,
            capacity,
            slots: VecDeque::new(),
            cursor: 0,
            next_seq: 1,
            dropped: 0,
            resend_after_ms: RESEND_AFTER.as_millis() as u64,
        }
    }

    pub fn with_resend_after(mut self, d: Duration) -> Self {
        self.resend_after_ms = d.as_millis() as u64;
        self
    }

    /// Queues a frame and returns its sequence number.
    pub fn push(&mut self, body: FrameBody, now: MonotonicMs) -> u64 {
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
            self.dropped += 1;
            self.cursor = self.cursor.saturating_sub(1);
            tracing::warn!(dropped = self.dropped, "outbound buffer full, oldest frame discarded");
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.slots.push_back(Slot {
            frame: Frame {
                seq,
                boot_id: self.boot_id,
                controller_time_ms: now,
                body,
            },
            sent_at: None,
        });
        seq
    }

    /// Drops every frame with `seq <= acked`.
    pub fn ack(&mut self, acked: u64) {
        while self.slots.front().is_some_and(|s| s.frame.seq <= acked) {
            self.slots.pop_front();
            self.cursor = self.cursor.saturating_sub(1);
        }
    }

    /// Frames to put on the wire now.
    pub fn poll(&mut self, now: MonotonicMs) -> Vec<Frame> {
        let stale = self.slots.front().and_then(|s| s.sent_at).is_some_and(|t| {
            now.saturating_sub(t) >= self.resend_after_ms
        });
        if stale {
            self.cursor = 0;
        }
        let out: Vec<Frame> = self
            .slots
            .range_mut(self.cursor..)
            .map(|s| {
                s.sent_at = Some(now);
                s.frame.clone()
            })
            .collect();
        self.cursor = self.slots.len();
        out
    }

    pub fn boot_id(&self) -> u32 {
        self.boot_id
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Lowest sequence number still queued, or the next one to be assigned.
    pub fn oldest_seq(&self) -> u64 {
        self.slots.front().map_or(self.next_seq, |s| s.frame.seq)
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(i: u64) -> FrameBody {
        FrameBody::AlertAck { alert_id: i }
    }

    fn seqs(frames: &[Frame]) -> Vec<u64> {
        frames.iter().map(|f| f.seq).collect()
    }

    #[test]
    fn sends_once_until_stale() {
        let mut b = OutboundBuffer::new(0, 10);
        b.push(body(1), 0);
        b.push(body(2), 0);
        assert_eq!(seqs(&b.poll(0)), vec![1, 2]);
        assert!(b.poll(1_000).is_empty());
        b.push(body(3), 1_500);
        assert_eq!(seqs(&b.poll(1_500)), vec![3]);
        // Frame 1 has waited 2 s: everything replays in order.
        assert_eq!(seqs(&b.poll(2_000)), vec![1, 2, 3]);
    }

    #[test]
    fn ack_releases_frames() {
        let mut b = OutboundBuffer::new(0, 10);
        for i in 0..5 {
            b.push(body(i), 0);
        }
        b.poll(0);
        b.ack(3);
        assert_eq!(b.len(), 2);
        assert_eq!(b.oldest_seq(), 4);
        b.push(body(9), 100);
        assert_eq!(seqs(&b.poll(100)), vec![6]);
        assert_eq!(seqs(&b.poll(2_100)), vec![4, 5, 6]);
    }

    #[test]
    fn replay_precedes_live_frames() {
        let mut b = OutboundBuffer::new(0, 10);
        b.push(body(1), 0);
        b.poll(0);
        b.push(body(2), 2_500);
        assert_eq!(seqs(&b.poll(2_500)), vec![1, 2]);
    }

    #[test]
    fn overflow_drops_oldest() {
        let mut b = OutboundBuffer::new(0, DEFAULT_BUFFER_CAPACITY);
        for i in 0..=DEFAULT_BUFFER_CAPACITY as u64 {
            b.push(body(i), 0);
        }
        assert_eq!(b.dropped(), 1);
        assert_eq!(b.len(), DEFAULT_BUFFER_CAPACITY);
        assert_eq!(b.oldest_seq(), 2);
    }
}
