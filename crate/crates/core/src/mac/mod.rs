//! MAC layer: 802.11 DCF with RTS/CTS, the two-slot cooperative MAC and the
//! overlapped analog-network-coding MAC.

pub mod anfl;
pub mod cycles;
pub mod frame;
pub mod node;
pub mod relay;
pub mod sender;

pub use anfl::{AnflEntry, AnflTable};
pub use cycles::{
    anc_ol_cycle, coop_cycle, direct_cycle, CyclePlan, DataAdjudicator, FlowOutcome, ScheduledTx,
};
pub use frame::{CtcGrant, Frame, FrameKind, PiggybackEstimate, TxMode};
pub use node::{
    anfl_maintain, dcf_backoff, on_overhear, AnflEvent, DcfParams, EstimateStore, NodeState,
    Packet, RoleFlags, TxOutcome,
};
pub use relay::{
    relay_contention, relay_overhear, ContentionResult, ModeDecision, RelayContext, RelayPlan,
};
pub use sender::{sender_after_cts, SenderPlan};

use crate::config::SimConfig;

/// MAC durations in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingNs {
    pub sifs: u64,
    pub difs: u64,
    pub slot: u64,
    pub rts: u64,
    pub cts: u64,
    pub ctc: u64,
    pub ack: u64,
    pub data: u64,
}

pub fn to_ns(seconds: f64) -> u64 {
    (seconds * 1e9).round() as u64
}

/// Payload symbols at one symbol per `1 / W`, rounded up to whole ns.
fn payload_ns(c: &SimConfig) -> u64 {
    let b = c.modulation.bits_per_symbol() as u64;
    let symbols = (c.packet_bits as u64).div_ceil(b);
    let exact = symbols as f64 * 1e9 / c.bandwidth;
    // Absorb representation error before rounding up.
    (exact - 1e-6).ceil().max(0.0) as u64
}

impl TimingNs {
    pub fn from_config(c: &SimConfig) -> Self {
        let t = &c.timing;
        TimingNs {
            sifs: to_ns(t.sifs),
            difs: to_ns(t.difs),
            slot: to_ns(t.slot),
            rts: to_ns(t.rts),
            cts: to_ns(t.cts),
            ctc: to_ns(t.ctc),
            ack: to_ns(t.ack),
            data: to_ns(t.preamble) + payload_ns(c),
        }
    }
}
