//! Timelines of the DATA phase for each transmission mode.
//!
//! A cycle plan lists every frame from the first DATA to the last ACK slot,
//! together with per-flow outcomes obtained from a [`DataAdjudicator`].

use super::frame::{Frame, TxMode};
use super::relay::ModeDecision;
use super::TimingNs;
use crate::channel::{FlowRoles, NodeId};

/// Decides whether DATA frames are decoded. Implemented by the engine for
/// each PHY fidelity level.
pub trait DataAdjudicator {
    fn direct(&mut self, src: NodeId, dst: NodeId) -> bool;
    fn coop(&mut self, src: NodeId, dst: NodeId, relay: NodeId) -> bool;
    /// Overlapped transmission; returns `(flow a ok, flow b ok)`.
    fn ancol(&mut self, roles: &FlowRoles) -> (bool, bool);
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledTx {
    pub start: u64,
    pub dur: u64,
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowOutcome {
    pub src: NodeId,
    pub dst: NodeId,
    pub delivered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePlan {
    pub mode: TxMode,
    pub txs: Vec<ScheduledTx>,
    pub outcomes: Vec<FlowOutcome>,
    /// End of the last reserved ACK slot.
    pub end: u64,
}

fn secs(ns: u64) -> f64 {
    ns as f64 * 1e-9
}

fn data(src: NodeId, dsts: Vec<NodeId>, bits: u32, start: u64, t: &TimingNs) -> ScheduledTx {
    ScheduledTx {
        start,
        dur: t.data,
        frame: Frame::data(src, dsts, bits, secs(t.data)),
    }
}

/// Appends the ACK slots, one per flow in order; an ACK is sent only for
/// delivered packets but every slot is reserved.
fn ack_slots(
    txs: &mut Vec<ScheduledTx>,
    outcomes: &[FlowOutcome],
    first: u64,
    t: &TimingNs,
) -> u64 {
    let mut at = first;
    let mut end = first;
    for o in outcomes {
        if o.delivered {
            txs.push(ScheduledTx {
                start: at,
                dur: t.ack,
                frame: Frame::ack(o.dst, o.src, secs(t.ack)),
            });
        }
        end = at + t.ack;
        at = end + t.sifs;
    }
    end
}

pub fn direct_cycle(
    src: NodeId,
    dst: NodeId,
    bits: u32,
    start: u64,
    t: &TimingNs,
    adj: &mut impl DataAdjudicator,
) -> CyclePlan {
    let mut txs = vec![data(src, vec![dst], bits, start, t)];
    let outcomes = vec![FlowOutcome {
        src,
        dst,
        delivered: adj.direct(src, dst),
    }];
    let end = ack_slots(&mut txs, &outcomes, start + t.data + t.sifs, t);
    CyclePlan {
        mode: TxMode::Direct,
        txs,
        outcomes,
        end,
    }
}

/// Source DATA, then the relay's amplified copy a SIFS later; the receiver
/// combines both.
pub fn coop_cycle(
    decision: &ModeDecision,
    src: NodeId,
    dst: NodeId,
    bits: u32,
    start: u64,
    t: &TimingNs,
    adj: &mut impl DataAdjudicator,
) -> CyclePlan {
    let relay = decision.relay.expect("COOP decision names a relay");
    let fwd = start + t.data + t.sifs;
    let mut txs = vec![
        data(src, vec![dst], bits, start, t),
        data(relay, vec![dst], bits, fwd, t),
    ];
    let outcomes = vec![FlowOutcome {
        src,
        dst,
        delivered: adj.coop(src, dst, relay),
    }];
    let end = ack_slots(&mut txs, &outcomes, fwd + t.data + t.sifs, t);
    CyclePlan {
        mode: TxMode::Coop,
        txs,
        outcomes,
        end,
    }
}

/// Both senders transmit together, the relay forwards the mixture to both
/// receivers, then each receiver acknowledges in turn. If the secondary
/// sender has nothing for its destination it stays silent and the cycle
/// degenerates to plain cooperation for the primary flow.
#[allow(clippy::too_many_arguments)]
pub fn anc_ol_cycle(
    decision: &ModeDecision,
    src: NodeId,
    dst: NodeId,
    secondary_active: bool,
    bits: u32,
    start: u64,
    t: &TimingNs,
    adj: &mut impl DataAdjudicator,
) -> CyclePlan {
    let relay = decision.relay.expect("ANCOL decision names a relay");
    let (s2, d2) = decision
        .secondary_pair
        .expect("ANCOL decision names a partner flow");
    if !secondary_active {
        return coop_cycle(decision, src, dst, bits, start, t, adj);
    }
    let fwd = start + t.data + t.sifs;
    let mut txs = vec![
        data(src, vec![dst], bits, start, t),
        data(s2, vec![d2], bits, start, t),
        data(relay, vec![dst, d2], bits, fwd, t),
    ];
    let roles = FlowRoles {
        src_a: src,
        dst_a: dst,
        src_b: s2,
        dst_b: d2,
        relay,
    };
    let (ok_a, ok_b) = adj.ancol(&roles);
    let outcomes = vec![
        FlowOutcome {
            src,
            dst,
            delivered: ok_a,
        },
        FlowOutcome {
            src: s2,
            dst: d2,
            delivered: ok_b,
        },
    ];
    let end = ack_slots(&mut txs, &outcomes, fwd + t.data + t.sifs, t);
    CyclePlan {
        mode: TxMode::Ancol,
        txs,
        outcomes,
        end,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::frame::FrameKind;

    struct Fixed(bool, bool);

    impl DataAdjudicator for Fixed {
        fn direct(&mut self, _: NodeId, _: NodeId) -> bool {
            self.0
        }
        fn coop(&mut self, _: NodeId, _: NodeId, _: NodeId) -> bool {
            self.0
        }
        fn ancol(&mut self, _: &FlowRoles) -> (bool, bool) {
            (self.0, self.1)
        }
    }

    fn t() -> TimingNs {
        TimingNs {
            sifs: 16_000,
            difs: 34_000,
            slot: 9_000,
            rts: 52_000,
            cts: 44_000,
            ctc: 47_000,
            ack: 44_000,
            data: 120_000,
        }
    }

    fn ancol_decision() -> ModeDecision {
        ModeDecision {
            mode: TxMode::Ancol,
            relay: Some(3),
            secondary_pair: Some((4, 5)),
            expected_rate: 1.0,
        }
    }

    #[test]
    fn overlapped_cycle_delivers_two_packets() {
        let p = anc_ol_cycle(
            &ancol_decision(),
            1,
            2,
            true,
            4000,
            0,
            &t(),
            &mut Fixed(true, true),
        );
        let datas: Vec<_> = p
            .txs
            .iter()
            .filter(|x| x.frame.kind == FrameKind::Data)
            .collect();
        assert_eq!(datas.len(), 3);
        assert_eq!(datas[0].start, datas[1].start);
        assert_eq!(datas[2].start, 136_000);
        assert_eq!(datas[2].frame.dsts, vec![2, 5]);
        let acks: Vec<_> = p
            .txs
            .iter()
            .filter(|x| x.frame.kind == FrameKind::Ack)
            .collect();
        assert_eq!((acks[0].frame.src, acks[1].frame.src), (2, 5));
        assert_eq!(acks[0].start, 272_000);
        assert_eq!(acks[1].start, 332_000);
        assert_eq!(p.end, 376_000);
        assert_eq!(p.outcomes.iter().filter(|o| o.delivered).count(), 2);
    }

    #[test]
    fn independent_outcomes_keep_slot_reservation() {
        let p = anc_ol_cycle(
            &ancol_decision(),
            1,
            2,
            true,
            4000,
            0,
            &t(),
            &mut Fixed(false, true),
        );
        let acks: Vec<_> = p
            .txs
            .iter()
            .filter(|x| x.frame.kind == FrameKind::Ack)
            .collect();
        assert_eq!(acks.len(), 1);
        assert_eq!(acks[0].frame.src, 5);
        assert_eq!(acks[0].start, 332_000);
        assert_eq!(p.end, 376_000);
    }

    #[test]
    fn silent_partner_degenerates_to_coop() {
        let p = anc_ol_cycle(
            &ancol_decision(),
            1,
            2,
            false,
            4000,
            0,
            &t(),
            &mut Fixed(true, true),
        );
        assert_eq!(p.mode, TxMode::Coop);
        assert_eq!(p.outcomes.len(), 1);
        assert_eq!(p.txs.len(), 3);
        assert_eq!(p.end, 316_000);
    }

    #[test]
    fn direct_cycle_timeline() {
        let p = direct_cycle(1, 2, 4000, 10, &t(), &mut Fixed(true, true));
        assert_eq!(p.txs[1].start, 10 + 120_000 + 16_000);
        assert_eq!(p.end, 10 + 120_000 + 16_000 + 44_000);
    }
}
