//! Single-slot latest-frame mailbox between a stream receiver and the tick.

use std::sync::Mutex;

use super::DeviceFrame;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MailboxStats {
    pub accepted: u64,
    /// Frames whose sequence was not above the last accepted one.
    pub dropped_late: u64,
    /// Accepted frames replaced before the tick read them.
    pub overwritten: u64,
}

#[derive(Debug, Default)]
struct Slot {
    frame: Option<DeviceFrame>,
    last_sequence: Option<u64>,
    stats: MailboxStats,
}

/// Latest-wins slot. Late or duplicate sequences are counted and dropped,
/// never reordered.
#[derive(Debug, Default)]
pub struct FrameMailbox {
    slot: Mutex<Slot>,
}

impl FrameMailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the frame was dropped as late.
    pub fn offer(&self, frame: DeviceFrame) -> bool {
        let mut slot = self.slot.lock().unwrap_or_else(|e| e.into_inner());
        if slot.last_sequence.is_some_and(|last| frame.sequence <= last) {
            slot.stats.dropped_late += 1;
            return false;
        }
        slot.last_sequence = Some(frame.sequence);
        slot.stats.accepted += 1;
        if slot.frame.replace(frame).is_some() {
            slot.stats.overwritten += 1;
        }
        true
    }

    /// Takes the newest unread frame, if any.
    pub fn take(&self) -> Option<DeviceFrame> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner()).frame.take()
    }

    pub fn stats(&self) -> MailboxStats {
        self.slot.lock().unwrap_or_else(|e| e.into_inner()).stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    fn frame(seq: u64) -> DeviceFrame {
        DeviceFrame {
            stream_id: "S".into(),
            local_rotations: vec![],
            root_translation: Vec3::zeros(),
            sequence: seq,
            timestamp: 0.0,
        }
    }

    #[test]
    fn newest_wins_and_late_frames_drop() {
        let m = FrameMailbox::new();
        assert!(m.offer(frame(1)));
        assert!(m.offer(frame(3)));
        assert!(!m.offer(frame(2)));
        assert!(!m.offer(frame(3)));
        assert_eq!(m.take().unwrap().sequence, 3);
        assert!(m.take().is_none());
        assert!(!m.offer(frame(3)));
        assert!(m.offer(frame(4)));
        assert_eq!(
            m.stats(),
            MailboxStats {
                accepted: 3,
                dropped_late: 3,
                overwritten: 1
            }
        );
    }
}
