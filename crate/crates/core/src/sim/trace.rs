//! Per-event trace records, CSV rendering and hashing.

use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::io;

use crate::channel::NodeId;
use crate::mac::{FrameKind, TxMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceKind {
    SlotTick,
    TxStart,
    TxEnd,
    TimerExpiry,
    FrameDelivery,
    /// A mode was chosen: by a relay (armed plan) or by the sender at DATA start.
    Decision,
    /// A packet reached the head of its sender's queue.
    Hol,
    DstChange,
    Drop,
    Retry,
    Disassoc,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::SlotTick => "slot_tick",
            TraceKind::TxStart => "tx_start",
            TraceKind::TxEnd => "tx_end",
            TraceKind::TimerExpiry => "timer_expiry",
            TraceKind::FrameDelivery => "frame_delivery",
            TraceKind::Decision => "decision",
            TraceKind::Hol => "hol",
            TraceKind::DstChange => "dst_change",
            TraceKind::Drop => "drop",
            TraceKind::Retry => "retry",
            TraceKind::Disassoc => "disassoc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    None,
    Ok,
    Collision,
    Delivered,
    Failed,
    Cancelled,
    Fallback,
    Backoff,
    ListenEnd,
    CtsTimeout,
    ExchangeEnd,
    DataStart,
    Armed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::None => "",
            Outcome::Ok => "ok",
            Outcome::Collision => "collision",
            Outcome::Delivered => "delivered",
            Outcome::Failed => "failed",
            Outcome::Cancelled => "cancelled",
            Outcome::Fallback => "fallback",
            Outcome::Backoff => "backoff",
            Outcome::ListenEnd => "listen_end",
            Outcome::CtsTimeout => "cts_timeout",
            Outcome::ExchangeEnd => "exchange_end",
            Outcome::DataStart => "data_start",
            Outcome::Armed => "armed",
        }
    }
}

/// Rate estimates behind a relay's busy tone or armed timer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRates {
    pub r_dir: f64,
    pub r_coop: f64,
    pub r_ancol: Option<f64>,
    pub r_norm: f64,
    pub tone_slot: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time_ns: u64,
    pub node: NodeId,
    pub kind: TraceKind,
    pub frame_kind: Option<FrameKind>,
    pub src: Option<NodeId>,
    pub dsts: Vec<NodeId>,
    pub mode: Option<TxMode>,
    pub outcome: Outcome,
    /// Exchange (contention round) this record belongs to.
    pub exchange: u64,
    pub payload_bits: u32,
    pub rates: Option<TraceRates>,
}

impl TraceRecord {
    pub fn new(time_ns: u64, node: NodeId, kind: TraceKind, exchange: u64) -> Self {
        TraceRecord {
            time_ns,
            node,
            kind,
            frame_kind: None,
            src: None,
            dsts: Vec::new(),
            mode: None,
            outcome: Outcome::None,
            exchange,
            payload_bits: 0,
            rates: None,
        }
    }

    pub fn time_us(&self) -> f64 {
        self.time_ns as f64 / 1e3
    }

    fn hash_into<H: Hasher>(&self, h: &mut H) {
        self.time_ns.hash(h);
        self.node.hash(h);
        self.kind.hash(h);
        self.frame_kind.hash(h);
        self.src.hash(h);
        self.dsts.hash(h);
        self.mode.hash(h);
        self.outcome.hash(h);
        self.exchange.hash(h);
        self.payload_bits.hash(h);
        if let Some(r) = &self.rates {
            r.r_dir.to_bits().hash(h);
            r.r_coop.to_bits().hash(h);
            r.r_ancol.map(f64::to_bits).hash(h);
            r.r_norm.to_bits().hash(h);
            r.tone_slot.hash(h);
        }
    }
}

pub const CSV_HEADER: &str = "time_us,node,event_kind,frame_kind,src,dsts,mode,outcome";

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{:03},{},{},{},",
            self.time_ns / 1000,
            self.time_ns % 1000,
            self.node,
            self.kind.as_str(),
            self.frame_kind.map(|k| k.as_str()).unwrap_or("")
        )?;
        if let Some(s) = self.src {
            write!(f, "{s}")?;
        }
        f.write_char(',')?;
        for (i, d) in self.dsts.iter().enumerate() {
            if i > 0 {
                f.write_char(';')?;
            }
            write!(f, "{d}")?;
        }
        write!(
            f,
            ",{},{}",
            self.mode.map(|m| m.as_str()).unwrap_or(""),
            self.outcome.as_str()
        )
    }
}

/// Records plus a running hash over every record, kept even when the
/// records themselves are not stored.
#[derive(Debug, Clone)]
pub struct Trace {
    records: Vec<TraceRecord>,
    keep: bool,
    hasher: std::collections::hash_map::DefaultHasher,
    count: u64,
}

impl Trace {
    pub fn new(keep: bool) -> Self {
        Trace {
            records: Vec::new(),
            keep,
            hasher: Default::default(),
            count: 0,
        }
    }

    pub fn push(&mut self, r: TraceRecord) {
        r.hash_into(&mut self.hasher);
        self.count += 1;
        if self.keep {
            self.records.push(r);
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn hash(&self) -> u64 {
        self.hasher.clone().finish()
    }
}

pub fn write_csv<W: io::Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}
