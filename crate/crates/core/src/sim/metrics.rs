//! Run metrics and their reconstruction from a trace.

use std::collections::BTreeMap;

use super::trace::{Outcome, TraceKind, TraceRecord};
use crate::channel::NodeId;
use crate::mac::{FrameKind, TxMode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModeCounts {
    pub direct: u64,
    pub coop: u64,
    pub ancol: u64,
}

impl ModeCounts {
    pub fn add(&mut self, m: TxMode) {
        match m {
            TxMode::Direct => self.direct += 1,
            TxMode::Coop => self.coop += 1,
            TxMode::Ancol => self.ancol += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.direct + self.coop + self.ancol
    }

    /// `(direct, coop, ancol)` as fractions of the total; zero when empty.
    pub fn shares(&self) -> (f64, f64, f64) {
        let t = self.total();
        if t == 0 {
            return (0.0, 0.0, 0.0);
        }
        let t = t as f64;
        (
            self.direct as f64 / t,
            self.coop as f64 / t,
            self.ancol as f64 / t,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    /// Simulated time in seconds.
    pub sim_time: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_queue: u64,
    pub delivered_bits: u64,
    /// Delivered payload bits per simulated second, overheads included.
    pub throughput_bps: f64,
    /// Per-packet delay from reaching the queue head to its ACK, seconds.
    pub delays: Vec<f64>,
    /// Mode of every DATA cycle.
    pub modes: ModeCounts,
    pub retransmissions: u64,
    pub detection_failures: u64,
    pub rts_collisions: u64,
    pub ctc_collisions: u64,
    pub ctc_fallbacks: u64,
    pub invariant_violations: u64,
    pub events: u64,
    pub truncated: bool,
}

impl Metrics {
    pub fn mean_delay(&self) -> f64 {
        if self.delays.is_empty() {
            return 0.0;
        }
        self.delays.iter().sum::<f64>() / self.delays.len() as f64
    }

    /// Nearest-rank percentile, `q` in `[0, 1]`.
    pub fn delay_percentile(&self, q: f64) -> f64 {
        if self.delays.is_empty() {
            return 0.0;
        }
        let mut d = self.delays.clone();
        d.sort_by(f64::total_cmp);
        let rank = ((q * d.len() as f64).ceil() as usize).clamp(1, d.len());
        d[rank - 1]
    }

    pub fn finish(&mut self) {
        self.throughput_bps = if self.sim_time > 0.0 {
            self.delivered_bits as f64 / self.sim_time
        } else {
            0.0
        };
    }
}

/// Rebuilds the metrics from trace records alone.
pub fn collect(records: &[TraceRecord]) -> Metrics {
    let mut m = Metrics::default();
    // Sender -> (time the HOL packet arrived, its size).
    let mut hol: BTreeMap<NodeId, (u64, u32)> = BTreeMap::new();
    let mut last = 0u64;
    for r in records {
        last = last.max(r.time_ns);
        match r.kind {
            TraceKind::Hol => {
                m.generated += 1;
                hol.insert(r.node, (r.time_ns, r.payload_bits));
            }
            TraceKind::FrameDelivery
                if r.frame_kind == Some(FrameKind::Ack) && r.outcome == Outcome::Ok =>
            {
                // ACK from the receiver back to the sender; delivery is
                // counted once the ACK ends.
                let sender = r.dsts[0];
                if let Some((t0, bits)) = hol.remove(&sender) {
                    m.delivered += 1;
                    m.delivered_bits += bits as u64;
                    m.delays.push((r.time_ns - t0) as f64 * 1e-9);
                }
            }
            TraceKind::FrameDelivery
                if r.frame_kind == Some(FrameKind::Data) && r.outcome == Outcome::Failed =>
            {
                m.detection_failures += 1;
            }
            TraceKind::FrameDelivery
                if r.frame_kind == Some(FrameKind::Rts) && r.outcome == Outcome::Collision =>
            {
                m.rts_collisions += 1;
            }
            TraceKind::FrameDelivery
                if r.frame_kind == Some(FrameKind::Ctc) && r.outcome == Outcome::Collision =>
            {
                m.ctc_collisions += 1;
            }
            TraceKind::TimerExpiry if r.outcome == Outcome::Fallback => m.ctc_fallbacks += 1,
            TraceKind::Decision if r.outcome == Outcome::DataStart => {
                if let Some(mode) = r.mode {
                    m.modes.add(mode);
                }
            }
            TraceKind::Retry => m.retransmissions += 1,
            TraceKind::Drop => {
                m.dropped += 1;
                hol.remove(&r.node);
            }
            _ => {}
        }
    }
    m.in_queue = hol.len() as u64;
    m.events = records.len() as u64;
    m.sim_time = last as f64 * 1e-9;
    m.finish();
    m
}
