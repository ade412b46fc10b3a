//! Relay-side mode selection and the relay contention round.

use super::frame::{Frame, FrameKind, TxMode};
use super::node::NodeState;
use crate::channel::{gain_power, FlowRoles, NodeId};
use crate::config::{ModeRule, RateGainMap};
use crate::phy::relay_gain;
use crate::rate::{
    ancol_beneficial, coop_beneficial, normalize_rate_gain, normalize_rate_gain_airtime,
    protocol_overhead, r_ancol, r_coop, r_dir, relay_backoff_slots, AncolGains, CoopRateForm,
    OverheadProfile, RateEstimateRow,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecision {
    pub mode: TxMode,
    pub relay: Option<NodeId>,
    pub secondary_pair: Option<(NodeId, NodeId)>,
    /// Estimated rate of the chosen mode in bit/s.
    pub expected_rate: f64,
}

impl ModeDecision {
    pub fn direct(expected_rate: f64) -> Self {
        ModeDecision {
            mode: TxMode::Direct,
            relay: None,
            secondary_pair: None,
            expected_rate,
        }
    }

    pub fn is_consistent(&self) -> bool {
        (self.relay.is_some() == (self.mode != TxMode::Direct))
            && (self.secondary_pair.is_some() == (self.mode == TxMode::Ancol))
    }
}

/// Inputs a relay needs besides its own state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayContext {
    pub bandwidth: f64,
    pub tx_power: f64,
    pub noise_var: f64,
    pub payload_bits: f64,
    pub n_max: u32,
    pub slot: f64,
    /// Control overhead with `t_rbkf = 0`; the relay adds its own backoff.
    pub base_overhead: OverheadProfile,
    pub coop_form: CoopRateForm,
    pub coop_enabled: bool,
    pub ancol_enabled: bool,
    pub rule: ModeRule,
    pub gain_map: RateGainMap,
    pub backlog_window: f64,
    pub max_age: Option<f64>,
    pub now: f64,
}

impl RelayContext {
    fn normalise(&self, rate: f64, baseline: f64) -> f64 {
        match self.gain_map {
            RateGainMap::Ratio => normalize_rate_gain(rate, baseline),
            RateGainMap::Airtime => normalize_rate_gain_airtime(rate, baseline),
        }
    }

    fn overhead(&self, slots: u32) -> f64 {
        protocol_overhead(&OverheadProfile {
            t_rbkf: slots as f64 * self.slot,
            ..self.base_overhead
        })
    }
}

/// What an armed relay intends to do for the current exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayPlan {
    pub decision: ModeDecision,
    /// Busy-tone slot: 1 proposes the overlapped mode, 2 plain cooperation.
    pub tone_slot: u8,
    pub r_norm: f64,
    pub backoff_slots: u32,
    pub r_dir: f64,
    pub r_coop: f64,
    pub r_ancol: Option<f64>,
}

/// Estimated overlapped sum rate as seen by both receivers; the smaller of
/// the two is the decision metric.
pub fn ancol_metric(
    roles: &FlowRoles,
    est: impl Fn(NodeId, NodeId) -> Option<crate::channel::ComplexGain>,
    bandwidth: f64,
    tx_power: f64,
    noise_var: f64,
) -> Option<f64> {
    let FlowRoles {
        src_a: s,
        dst_a: d,
        src_b: s2,
        dst_b: d2,
        relay: r,
    } = *roles;
    let h1 = est(s, d)?;
    let h2 = est(s, r)?;
    let h3 = est(s, d2)?;
    let h4 = est(r, d)?;
    let h5 = est(r, d2)?;
    let h6 = est(s2, d2)?;
    let h7 = est(s2, r)?;
    let h8 = est(s2, d)?;
    let g = relay_gain(tx_power, &[gain_power(h2), gain_power(h7)], noise_var);
    let at_d = r_ancol(
        bandwidth,
        tx_power,
        &AncolGains { h1, h2, h4, h7, h8 },
        g,
        noise_var,
    );
    let at_d2 = r_ancol(
        bandwidth,
        tx_power,
        &AncolGains {
            h1: h6,
            h2: h7,
            h4: h5,
            h7: h2,
            h8: h3,
        },
        g,
        noise_var,
    );
    Some(at_d.min(at_d2))
}

/// Relay reaction to a completed RTS/CTS pair. Updates the rate table and
/// returns a plan when cooperation is worthwhile.
pub fn relay_overhear(
    state: &mut NodeState,
    rts: &Frame,
    cts: &Frame,
    ctx: &RelayContext,
) -> Option<RelayPlan> {
    if rts.kind != FrameKind::Rts || cts.kind != FrameKind::Cts {
        return None;
    }
    let (s, d, r) = (rts.src, rts.dsts[0], state.id);
    if cts.src != d || cts.dsts[0] != s || r == s || r == d {
        return None;
    }
    let now = ctx.now;
    let est = |a: NodeId, b: NodeId| state.estimates.get(a, b, now, ctx.max_age);
    let h1 = est(s, d)?;
    let h2 = est(s, r)?;
    let h4 = est(r, d)?;
    let (p, nv, w) = (ctx.tx_power, ctx.noise_var, ctx.bandwidth);

    let rd = r_dir(w, p, gain_power(h1), nv);
    let g = relay_gain(p, &[gain_power(h2)], nv);
    let rc = r_coop(
        w,
        p,
        gain_power(h1),
        gain_power(h2),
        gain_power(h4),
        g,
        nv,
        ctx.coop_form,
    );

    let mut rows = vec![RateEstimateRow {
        pair1: (s, d),
        pair2: None,
        relay: Some(r),
        r_dir: rd,
        r_coop: Some(rc),
        r_ancol: None,
    }];

    // Best partner flow among recently active senders.
    let mut best: Option<((NodeId, NodeId), f64)> = None;
    for (&s2, sighting) in &state.flows {
        let d2 = sighting.dst;
        if now - sighting.time > ctx.backlog_window {
            continue;
        }
        let roles = FlowRoles {
            src_a: s,
            dst_a: d,
            src_b: s2,
            dst_b: d2,
            relay: r,
        };
        if !roles.is_valid() {
            continue;
        }
        if let Some(ra) = ancol_metric(&roles, est, w, p, nv) {
            rows.push(RateEstimateRow {
                pair1: (s, d),
                pair2: Some((s2, d2)),
                relay: Some(r),
                r_dir: rd,
                r_coop: Some(rc),
                r_ancol: Some(ra),
            });
            if best.is_none_or(|(_, b)| ra > b) {
                best = Some(((s2, d2), ra));
            }
        }
    }
    state.rate_estimates.retain(|row| row.pair1 != (s, d));
    state.rate_estimates.extend(rows);

    let coop_norm = ctx.normalise(rc, rd);
    let coop_slots = relay_backoff_slots(coop_norm, ctx.n_max);
    let coop_ok = match ctx.rule {
        ModeRule::RateComparison => rc > rd,
        ModeRule::Overhead => coop_beneficial(ctx.payload_bits, rc, rd, ctx.overhead(coop_slots)),
    };
    if !coop_ok {
        return None;
    }

    if ctx.ancol_enabled {
        if let Some((pair2, ra)) = best {
            let anc_norm = ctx.normalise(ra, rd);
            let anc_slots = relay_backoff_slots(anc_norm, ctx.n_max);
            let ancol_ok = match ctx.rule {
                ModeRule::RateComparison => ra > rc,
                ModeRule::Overhead => ancol_beneficial(
                    ctx.payload_bits,
                    ra,
                    rc,
                    ctx.overhead(anc_slots),
                    ctx.overhead(coop_slots),
                ),
            };
            if ancol_ok {
                return Some(RelayPlan {
                    decision: ModeDecision {
                        mode: TxMode::Ancol,
                        relay: Some(r),
                        secondary_pair: Some(pair2),
                        expected_rate: ra,
                    },
                    tone_slot: 1,
                    r_norm: anc_norm,
                    backoff_slots: anc_slots,
                    r_dir: rd,
                    r_coop: rc,
                    r_ancol: Some(ra),
                });
            }
        }
    }
    if !ctx.coop_enabled {
        return None;
    }
    Some(RelayPlan {
        decision: ModeDecision {
            mode: TxMode::Coop,
            relay: Some(r),
            secondary_pair: None,
            expected_rate: rc,
        },
        tone_slot: 2,
        r_norm: coop_norm,
        backoff_slots: coop_slots,
        r_dir: rd,
        r_coop: rc,
        r_ancol: best.map(|(_, ra)| ra),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentionResult {
    /// Nobody was armed.
    Empty,
    /// A unique relay fired first.
    Winner { relay: NodeId, slots: u32 },
    /// Several relays fired in the same slot and their CTCs collided.
    Collision { relays: Vec<NodeId>, slots: u32 },
}

/// Slot race between armed relays: the one with the fewest backoff slots
/// sends its CTC first and everyone else stops.
pub fn relay_contention(relays: &[(NodeId, f64)], n_max: u32) -> ContentionResult {
    let Some(min) = relays
        .iter()
        .map(|&(_, r)| relay_backoff_slots(r, n_max))
        .min()
    else {
        return ContentionResult::Empty;
    };
    let mut first: Vec<NodeId> = relays
        .iter()
        .filter(|&&(_, r)| relay_backoff_slots(r, n_max) == min)
        .map(|&(id, _)| id)
        .collect();
    if first.len() == 1 {
        ContentionResult::Winner {
            relay: first[0],
            slots: min,
        }
    } else {
        first.sort_unstable();
        ContentionResult::Collision {
            relays: first,
            slots: min,
        }
    }
}
