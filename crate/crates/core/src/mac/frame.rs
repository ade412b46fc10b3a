use std::fmt;

use crate::channel::{ComplexGain, NodeId};
use crate::error::MalformedFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameKind {
    Rts,
    Cts,
    /// Clear-to-cooperate: a CTS naming both nodes that may transmit next.
    Ctc,
    Data,
    Ack,
    BusyTone,
}

impl FrameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Rts => "RTS",
            FrameKind::Cts => "CTS",
            FrameKind::Ctc => "CTC",
            FrameKind::Data => "DATA",
            FrameKind::Ack => "ACK",
            FrameKind::BusyTone => "BUSY_TONE",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transmission mode of one data exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TxMode {
    Direct,
    Coop,
    Ancol,
}

impl TxMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TxMode::Direct => "DIRECT",
            TxMode::Coop => "COOP",
            TxMode::Ancol => "ANCOL",
        }
    }
}

impl fmt::Display for TxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A channel estimate carried in a CTS: `h(from -> to)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiggybackEstimate {
    pub from: NodeId,
    pub to: NodeId,
    pub gain: ComplexGain,
}

/// What a CTC authorises. `primary` is the flow that won the RTS/CTS
/// exchange; `secondary` is the flow invited to overlap with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CtcGrant {
    pub mode: TxMode,
    pub primary: (NodeId, NodeId),
    pub secondary: Option<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub kind: FrameKind,
    pub src: NodeId,
    pub dsts: Vec<NodeId>,
    pub payload_bits: u32,
    pub piggyback: Vec<PiggybackEstimate>,
    /// Airtime in seconds.
    pub duration: f64,
    pub grant: Option<CtcGrant>,
}

impl Frame {
    pub fn rts(src: NodeId, dst: NodeId, payload_bits: u32, duration: f64) -> Frame {
        Frame {
            kind: FrameKind::Rts,
            src,
            dsts: vec![dst],
            payload_bits,
            piggyback: Vec::new(),
            duration,
            grant: None,
        }
    }

    pub fn cts(
        src: NodeId,
        dst: NodeId,
        piggyback: Vec<PiggybackEstimate>,
        duration: f64,
    ) -> Frame {
        Frame {
            kind: FrameKind::Cts,
            src,
            dsts: vec![dst],
            payload_bits: 0,
            piggyback,
            duration,
            grant: None,
        }
    }

    /// CTC addressed to the two nodes that transmit next: both senders for
    /// the overlapped mode, sender and receiver for plain cooperation.
    pub fn ctc(relay: NodeId, grant: CtcGrant, duration: f64) -> Frame {
        let dsts = match grant.secondary {
            Some((s2, _)) if grant.mode == TxMode::Ancol => vec![grant.primary.0, s2],
            _ => vec![grant.primary.0, grant.primary.1],
        };
        Frame {
            kind: FrameKind::Ctc,
            src: relay,
            dsts,
            payload_bits: 0,
            piggyback: Vec::new(),
            duration,
            grant: Some(grant),
        }
    }

    pub fn data(src: NodeId, dsts: Vec<NodeId>, payload_bits: u32, duration: f64) -> Frame {
        Frame {
            kind: FrameKind::Data,
            src,
            dsts,
            payload_bits,
            piggyback: Vec::new(),
            duration,
            grant: None,
        }
    }

    pub fn ack(src: NodeId, dst: NodeId, duration: f64) -> Frame {
        Frame {
            kind: FrameKind::Ack,
            src,
            dsts: vec![dst],
            payload_bits: 0,
            piggyback: Vec::new(),
            duration,
            grant: None,
        }
    }

    /// One-slot energy burst. `src` is kept for tracing only.
    pub fn busy_tone(src: NodeId, slot: f64) -> Frame {
        Frame {
            kind: FrameKind::BusyTone,
            src,
            dsts: Vec::new(),
            payload_bits: 0,
            piggyback: Vec::new(),
            duration: slot,
            grant: None,
        }
    }

    /// Checks the per-kind address invariants.
    pub fn validate(&self, slot: f64) -> Result<(), MalformedFrame> {
        let bad = |reason| {
            Err(MalformedFrame {
                kind: self.kind.as_str(),
                reason,
            })
        };
        match self.kind {
            FrameKind::Ctc => {
                if self.dsts.len() != 2 {
                    return bad("CTC needs exactly two destinations");
                }
                if self.dsts[0] == self.dsts[1] {
                    return bad("CTC destinations must differ");
                }
                if self.grant.is_none() {
                    return bad("CTC without grant");
                }
            }
            FrameKind::BusyTone => {
                if !self.dsts.is_empty() {
                    return bad("busy tone carries no addresses");
                }
                if (self.duration - slot).abs() > 1e-12 {
                    return bad("busy tone lasts one slot");
                }
            }
            FrameKind::Data => {
                if self.dsts.is_empty() || self.dsts.len() > 2 {
                    return bad("DATA needs one or two destinations");
                }
            }
            _ => {
                if self.dsts.len() != 1 {
                    return bad("exactly one destination expected");
                }
            }
        }
        if self.dsts.contains(&self.src) {
            return bad("frame addressed to its own sender");
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad("invalid duration");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SLOT: f64 = 9e-6;

    #[test]
    fn constructors_produce_valid_frames() {
        assert!(Frame::rts(1, 2, 4000, 52e-6).validate(SLOT).is_ok());
        assert!(Frame::cts(2, 1, vec![], 44e-6).validate(SLOT).is_ok());
        assert!(Frame::busy_tone(3, SLOT).validate(SLOT).is_ok());
        let g = CtcGrant {
            mode: TxMode::Ancol,
            primary: (1, 2),
            secondary: Some((4, 5)),
        };
        let ctc = Frame::ctc(3, g, 47e-6);
        assert_eq!(ctc.dsts, vec![1, 4]);
        assert!(ctc.validate(SLOT).is_ok());
        let g = CtcGrant {
            mode: TxMode::Coop,
            primary: (1, 2),
            secondary: None,
        };
        assert_eq!(Frame::ctc(3, g, 47e-6).dsts, vec![1, 2]);
    }

    #[test]
    fn invariant_violations_are_reported() {
        let mut ctc = Frame::ctc(
            3,
            CtcGrant {
                mode: TxMode::Coop,
                primary: (1, 2),
                secondary: None,
            },
            47e-6,
        );
        ctc.dsts.pop();
        assert!(ctc.validate(SLOT).is_err());
        let mut tone = Frame::busy_tone(3, SLOT);
        tone.dsts.push(1);
        assert!(tone.validate(SLOT).is_err());
        let mut rts = Frame::rts(1, 2, 0, 52e-6);
        rts.dsts.push(3);
        assert!(rts.validate(SLOT).is_err());
        assert!(Frame::rts(1, 1, 0, 52e-6).validate(SLOT).is_err());
    }
}
