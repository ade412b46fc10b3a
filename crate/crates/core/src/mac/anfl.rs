//! Table of overheard cooperative flows.
//!
//! Each entry records one CTC: which flows were (or would have been) helped
//! by which relay. A destination consults it to decide which cross-channel
//! estimates are worth piggybacking in its CTS.

use crate::channel::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnflEntry {
    pub src1: NodeId,
    pub dst1: NodeId,
    pub src2: Option<NodeId>,
    pub dst2: Option<NodeId>,
    pub relay: NodeId,
    pub last_seen: f64,
}

impl AnflEntry {
    fn key(&self) -> (NodeId, NodeId, Option<NodeId>, Option<NodeId>, NodeId) {
        (self.src1, self.dst1, self.src2, self.dst2, self.relay)
    }

    pub fn mentions(&self, node: NodeId) -> bool {
        self.src1 == node
            || self.dst1 == node
            || self.src2 == Some(node)
            || self.dst2 == Some(node)
            || self.relay == node
    }

    pub fn has_source(&self, node: NodeId) -> bool {
        self.src1 == node || self.src2 == Some(node)
    }

    /// The relay differs from every flow endpoint.
    pub fn is_well_formed(&self) -> bool {
        !(self.src1 == self.relay
            || self.dst1 == self.relay
            || self.src2 == Some(self.relay)
            || self.dst2 == Some(self.relay))
    }
}

/// Bounded LRU table of [`AnflEntry`].
#[derive(Debug, Clone)]
pub struct AnflTable {
    capacity: usize,
    entries: Vec<AnflEntry>,
}

impl AnflTable {
    pub fn new(capacity: usize) -> Self {
        AnflTable {
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AnflEntry] {
        &self.entries
    }

    /// Inserts or refreshes `entry`. Returns the evicted entry, if any.
    /// Malformed entries (relay equal to an endpoint) are rejected.
    pub fn upsert(&mut self, entry: AnflEntry) -> Option<AnflEntry> {
        if !entry.is_well_formed() || self.capacity == 0 {
            return None;
        }
        if let Some(e) = self.entries.iter_mut().find(|e| e.key() == entry.key()) {
            e.last_seen = e.last_seen.max(entry.last_seen);
            return None;
        }
        let evicted = if self.entries.len() >= self.capacity {
            // Oldest first; earliest insertion wins ties.
            let (idx, _) = self
                .entries
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.last_seen.total_cmp(&b.1.last_seen))
                .expect("non-empty at capacity");
            Some(self.entries.remove(idx))
        } else {
            None
        };
        self.entries.push(entry);
        evicted
    }

    /// Removes every entry that mentions `node`.
    pub fn purge(&mut self, node: NodeId) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| !e.mentions(node));
        before - self.entries.len()
    }

    /// Relays through which `node` has been seen sending, in ascending order.
    pub fn relays_used_by(&self, node: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .entries
            .iter()
            .filter(|e| e.has_source(node))
            .map(|e| e.relay)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Senders recorded with `relay`, in ascending order.
    pub fn sources_via(&self, relay: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .entries
            .iter()
            .filter(|e| e.relay == relay)
            .flat_map(|e| std::iter::once(e.src1).chain(e.src2))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
