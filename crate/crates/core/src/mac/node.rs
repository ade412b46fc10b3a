//! Per-node MAC state: DCF backoff, the local channel-estimate store, and
//! the overhearing rules that populate it.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use super::anfl::{AnflEntry, AnflTable};
use super::frame::{Frame, FrameKind, PiggybackEstimate};
use crate::channel::{ComplexGain, NodeId};
use crate::rate::RateEstimateRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoleFlags {
    pub sender: bool,
    pub receiver: bool,
    pub relay_candidate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub dst: NodeId,
    pub bits: u32,
    /// When the packet reached the head of the queue.
    pub hol_since: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    Success,
    Collision,
    Failure,
}

/// Locally known channel estimates, keyed by `(from, to)`.
///
/// Lookups fall back to the reverse direction: nodes assume reciprocity even
/// when the true channel is not reciprocal.
#[derive(Debug, Clone, Default)]
pub struct EstimateStore {
    map: BTreeMap<(NodeId, NodeId), (ComplexGain, f64)>,
}

impl EstimateStore {
    pub fn insert(&mut self, from: NodeId, to: NodeId, gain: ComplexGain, now: f64) {
        self.map.insert((from, to), (gain, now));
    }

    /// Estimate of `h(from -> to)` no older than `max_age`, if known.
    pub fn get(
        &self,
        from: NodeId,
        to: NodeId,
        now: f64,
        max_age: Option<f64>,
    ) -> Option<ComplexGain> {
        let fresh = |&(g, t): &(ComplexGain, f64)| match max_age {
            Some(a) if now - t > a => None,
            _ => Some(g),
        };
        self.map
            .get(&(from, to))
            .and_then(fresh)
            .or_else(|| self.map.get(&(to, from)).and_then(fresh))
    }

    pub fn purge(&mut self, node: NodeId) -> usize {
        let before = self.map.len();
        self.map.retain(|&(a, b), _| a != node && b != node);
        before - self.map.len()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn mentions(&self, node: NodeId) -> bool {
        self.map.keys().any(|&(a, b)| a == node || b == node)
    }
}

/// Latest RTS heard from a sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSighting {
    pub dst: NodeId,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub roles: RoleFlags,
    pub backoff: u32,
    pub cw: u32,
    pub retry: u32,
    pub queue: VecDeque<Packet>,
    pub anfl: AnflTable,
    pub estimates: EstimateStore,
    pub rate_estimates: Vec<RateEstimateRow>,
    /// Most recent RTS heard from each sender.
    pub flows: BTreeMap<NodeId, FlowSighting>,
    pub malformed: u64,
}

impl NodeState {
    pub fn new(id: NodeId, roles: RoleFlags, cw_min: u32, anfl_capacity: usize) -> Self {
        NodeState {
            id,
            roles,
            backoff: 0,
            cw: cw_min,
            retry: 0,
            queue: VecDeque::new(),
            anfl: AnflTable::new(anfl_capacity),
            estimates: EstimateStore::default(),
            rate_estimates: Vec::new(),
            flows: BTreeMap::new(),
            malformed: 0,
        }
    }

    pub fn hol(&self) -> Option<&Packet> {
        self.queue.front()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DcfParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
}

/// Binary exponential backoff after an attempt. Returns the dropped packet
/// when the retry limit is exceeded.
pub fn dcf_backoff<R: Rng + ?Sized>(
    state: &mut NodeState,
    outcome: TxOutcome,
    p: &DcfParams,
    rng: &mut R,
) -> Option<Packet> {
    let mut dropped = None;
    match outcome {
        TxOutcome::Success => {
            state.cw = p.cw_min;
            state.retry = 0;
        }
        TxOutcome::Collision | TxOutcome::Failure => {
            state.retry += 1;
            if state.retry > p.retry_limit {
                dropped = state.queue.pop_front();
                state.cw = p.cw_min;
                state.retry = 0;
            } else {
                state.cw = (state.cw.saturating_mul(2)).min(p.cw_max);
            }
        }
    }
    state.backoff = rng.random_range(0..=state.cw);
    dropped
}

/// Reaction of a node to a decodable frame, following the cooperative
/// channel-estimation algorithm. Returns the CTS payload when the frame is
/// an RTS addressed to this node.
pub fn on_overhear(
    state: &mut NodeState,
    frame: &Frame,
    measured_gain: ComplexGain,
    now: f64,
    slot: f64,
) -> Option<Vec<PiggybackEstimate>> {
    if frame.validate(slot).is_err() {
        state.malformed += 1;
        return None;
    }
    let me = state.id;
    let j = frame.src;
    match frame.kind {
        FrameKind::Rts => {
            let k = frame.dsts[0];
            state.estimates.insert(j, me, measured_gain, now);
            state.flows.insert(j, FlowSighting { dst: k, time: now });
            if k != me {
                return None;
            }
            let mut payload = vec![PiggybackEstimate {
                from: j,
                to: me,
                gain: measured_gain,
            }];
            // For every relay r that has helped j, add h(i' -> me) for the
            // other senders i' that r has also helped.
            for r in state.anfl.relays_used_by(j) {
                for other in state.anfl.sources_via(r) {
                    if other == j || other == me || payload.iter().any(|e| e.from == other) {
                        continue;
                    }
                    if let Some(g) = state.estimates.get(other, me, now, None) {
                        payload.push(PiggybackEstimate {
                            from: other,
                            to: me,
                            gain: g,
                        });
                    }
                }
            }
            Some(payload)
        }
        FrameKind::Cts => {
            let k = frame.dsts[0];
            if k == me || state.roles.relay_candidate {
                state.estimates.insert(j, me, measured_gain, now);
                for e in &frame.piggyback {
                    state.estimates.insert(e.from, e.to, e.gain, now);
                }
            }
            None
        }
        FrameKind::Ctc => {
            if let Some(g) = frame.grant {
                let (src2, dst2) = match g.secondary {
                    Some((a, b)) => (Some(a), Some(b)),
                    None => (None, None),
                };
                anfl_maintain(
                    state,
                    AnflEvent::CtcOverheard(AnflEntry {
                        src1: g.primary.0,
                        dst1: g.primary.1,
                        src2,
                        dst2,
                        relay: j,
                        last_seen: now,
                    }),
                );
            }
            None
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnflEvent {
    CtcOverheard(AnflEntry),
    Disassociation(NodeId),
}

pub fn anfl_maintain(state: &mut NodeState, event: AnflEvent) {
    match event {
        AnflEvent::CtcOverheard(entry) => {
            state.anfl.upsert(entry);
        }
        AnflEvent::Disassociation(node) => {
            state.anfl.purge(node);
            state.estimates.purge(node);
            state.flows.remove(&node);
            state.flows.retain(|_, f| f.dst != node);
            state.rate_estimates.retain(|r| !(row_mentions(r, node)));
        }
    }
}

fn row_mentions(r: &RateEstimateRow, node: NodeId) -> bool {
    r.pair1.0 == node
        || r.pair1.1 == node
        || r.relay == Some(node)
        || r.pair2.is_some_and(|(a, b)| a == node || b == node)
}
