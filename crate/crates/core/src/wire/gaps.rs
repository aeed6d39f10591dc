//! Sequence-gap accounting for one packet stream.

use serde::{Deserialize, Serialize};

use super::packet::{Packet, PacketType};

/// `(first_missing_seq, count)`.
pub type Gap = (u32, u32);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<Gap>,
    /// Sequence numbers at or below one already passed: repeats, never gaps.
    pub duplicates: Vec<u32>,
}

impl GapReport {
    pub fn missing(&self) -> u64 {
        self.gaps.iter().map(|g| g.1 as u64).sum()
    }
}

/// Streams start at seq 0. Each seq above the expected one opens a gap for
/// the skipped range; a seq below it is a duplicate.
#[derive(Debug, Clone, Default)]
pub struct GapTracker {
    next: u32,
    report: GapReport,
}

impl GapTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, seq: u32) {
        if seq == self.next {
            self.next = seq.wrapping_add(1);
        } else if seq > self.next {
            self.report.gaps.push((self.next, seq - self.next));
            self.next = seq.wrapping_add(1);
        } else {
            self.report.duplicates.push(seq);
        }
    }

    /// Report, treating every seq below `end` as expected. Trailing losses
    /// are only visible when the sender's final count is known.
    pub fn finish(mut self, end: Option<u32>) -> GapReport {
        if let Some(end) = end {
            if end > self.next {
                self.report.gaps.push((self.next, end - self.next));
            }
        }
        self.report
    }
}

/// Gaps in a sequence list, without trailing-loss detection.
pub fn detect_gaps(seqs: &[u32]) -> GapReport {
    let mut t = GapTracker::new();
    seqs.iter().for_each(|s| t.observe(*s));
    t.finish(None)
}

/// Gaps in the packets of one type.
pub fn detect_packet_gaps(packets: &[Packet], ptype: PacketType) -> GapReport {
    let seqs: Vec<u32> = packets.iter().filter(|p| p.ptype() == ptype).map(|p| p.seq).collect();
    detect_gaps(&seqs)
}
