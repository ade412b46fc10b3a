//! Event queue with a total, deterministic order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::channel::NodeId;
use crate::mac::TxMode;

/// Declaration order is the tie-break priority at equal times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    TxEnd,
    FrameDelivery,
    TimerExpiry,
    TxStart,
    SlotTick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timer {
    /// Sender reaches the end of the busy-tone slots.
    ListenEnd,
    /// A relay's contention backoff ran out.
    RelayBackoff,
    /// Sender stops waiting for a CTC.
    CtcDeadline,
    DataStart(TxMode),
    CtsTimeout,
    ExchangeEnd,
    Disassociate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// Index into the engine's transmission table.
    Tx(usize),
    Timer(Timer),
    /// Backoff countdown of `slots` slots reaches zero.
    Backoff {
        generation: u64,
        slots: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Nanoseconds.
    pub time: u64,
    pub kind: EventKind,
    pub node: NodeId,
    pub seq: u64,
    pub payload: Payload,
}

impl Event {
    fn key(&self) -> (u64, EventKind, NodeId, u64) {
        (self.time, self.kind, self.node, self.seq)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other.key().cmp(&self.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
    now: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Schedules an event. Scheduling into the past is a logic error.
    pub fn push(&mut self, time: u64, kind: EventKind, node: NodeId, payload: Payload) {
        assert!(
            time >= self.now,
            "event scheduled in the past: {time} < {}",
            self.now
        );
        self.seq += 1;
        self.heap.push(Event {
            time,
            kind,
            node,
            seq: self.seq,
            payload,
        });
    }

    pub fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        debug_assert!(e.time >= self.now);
        self.now = e.time;
        Some(e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
