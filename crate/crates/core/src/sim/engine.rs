//! The discrete-event loop.
//!
//! All nodes share one cell, so every node hears every transmission and at
//! most one exchange (RTS through the last ACK slot) is in progress at a
//! time. Backoff counters of all backlogged senders run down together while
//! the medium is idle and freeze during exchanges.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adjudicate::{Adjudicator, PhyParams};
use super::event::{EventKind, EventQueue, Payload, Timer};
use super::metrics::Metrics;
use super::topology::{build_topology, Topology};
use super::trace::{Outcome, Trace, TraceKind, TraceRates, TraceRecord};
use crate::channel::{estimate_gain, LinkTable, NodeId};
use crate::config::{ScenarioKind, SimConfig, StalenessModel};
use crate::error::ConfigError;
use crate::mac::sender::{data_start_after_ctc, relay_window_start, tone_slots};
use crate::mac::{
    anc_ol_cycle, anfl_maintain, coop_cycle, dcf_backoff, direct_cycle, on_overhear,
    relay_overhear, sender_after_cts, AnflEvent, CtcGrant, CyclePlan, DcfParams, Frame, FrameKind,
    ModeDecision, NodeState, Packet, RelayContext, RelayPlan, RoleFlags, SenderPlan, TimingNs,
    TxMode, TxOutcome,
};
use crate::phy::Constellation;
use crate::rate::OverheadProfile;

/// Independent random streams, one per purpose, so that e.g. enabling the
/// cooperative modes does not perturb backoff draws.
struct Streams {
    fading: ChaCha8Rng,
    estimation: ChaCha8Rng,
    backoff: ChaCha8Rng,
    phy: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

#[derive(Debug, Clone)]
struct TxRec {
    frame: Frame,
    end: u64,
    exchange: u64,
    collided: bool,
    /// DATA frames sent concurrently by design share a group id.
    group: Option<u64>,
    mode: Option<TxMode>,
    rates: Option<TraceRates>,
    /// Outcome recorded when a source DATA frame is delivered.
    hint: Outcome,
}

#[derive(Debug, Default)]
struct Exchange {
    id: u64,
    senders: Vec<NodeId>,
    src: NodeId,
    dst: NodeId,
    rts: Option<Frame>,
    cts_end: u64,
    plans: Vec<(NodeId, RelayPlan)>,
    tone1: bool,
    tone2: bool,
    timeout_armed: bool,
    ctc_start: Option<u64>,
    ctc_ok: Option<ModeDecision>,
    data_started: bool,
    plan: Option<CyclePlan>,
}

/// Result of one simulation run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Metrics,
    /// Empty unless `record_trace` is set.
    pub trace: Vec<super::trace::TraceRecord>,
    pub trace_hash: u64,
    pub topology: Topology,
}

pub struct Engine {
    cfg: SimConfig,
    t: TimingNs,
    phy: PhyParams,
    constellation: Constellation,
    topo: Topology,
    links: LinkTable,
    nodes: Vec<NodeState>,
    associated: Vec<bool>,
    /// Current destination of each sender's flow.
    dst_of: Vec<Option<NodeId>>,
    sending: Vec<bool>,
    flow_delivered: Vec<u64>,
    q: EventQueue,
    trace: Trace,
    m: Metrics,
    rng: Streams,
    txs: Vec<TxRec>,
    active: Vec<usize>,
    ex: Option<Exchange>,
    next_exchange: u64,
    backoff_generation: u64,
    pending_disassoc: Vec<NodeId>,
    next_packet: u64,
    group_seq: u64,
    done: bool,
}

fn secs(ns: u64) -> f64 {
    ns as f64 * 1e-9
}

impl Engine {
    pub fn new(cfg: &SimConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let seed = cfg.seed;
        let mut topo_rng = stream(seed, 0);
        let topo = build_topology(
            cfg.n_nodes,
            cfg.cell_radius,
            cfg.avg_snr_db,
            cfg.path_loss_exp,
            cfg.tx_power,
            cfg.noise_var,
            &mut topo_rng,
        );
        let links = LinkTable::new(cfg.n_nodes, topo.avg_power.clone(), cfg.reciprocal);
        let roles = RoleFlags {
            sender: true,
            receiver: true,
            relay_candidate: true,
        };
        let nodes: Vec<NodeState> = (0..cfg.n_nodes)
            .map(|i| {
                let mut r = roles;
                r.sender = i < cfg.senders();
                NodeState::new(i, r, cfg.cw_min, cfg.anfl_capacity)
            })
            .collect();
        let n = cfg.n_nodes;
        let senders = cfg.senders();
        let engine = Engine {
            t: TimingNs::from_config(&cfg),
            phy: PhyParams::from_config(&cfg),
            constellation: Constellation::new(cfg.modulation),
            topo,
            links,
            nodes,
            associated: vec![true; n],
            dst_of: (0..n)
                .map(|i| (i < senders).then_some((i + 1) % n))
                .collect(),
            sending: (0..n).map(|i| i < senders).collect(),
            flow_delivered: vec![0; n],
            q: EventQueue::new(),
            trace: Trace::new(cfg.record_trace),
            m: Metrics::default(),
            rng: Streams {
                fading: stream(seed, 1),
                estimation: stream(seed, 2),
                backoff: stream(seed, 3),
                phy: stream(seed, 4),
            },
            txs: Vec::new(),
            active: Vec::new(),
            ex: None,
            next_exchange: 0,
            backoff_generation: 0,
            pending_disassoc: Vec::new(),
            next_packet: 0,
            group_seq: 0,
            done: false,
            cfg,
        };
        Ok(engine)
    }

    fn dcf(&self) -> DcfParams {
        DcfParams {
            cw_min: self.cfg.cw_min,
            cw_max: self.cfg.cw_max,
            retry_limit: self.cfg.retry_limit,
        }
    }

    fn exchange_id(&self) -> u64 {
        self.ex.as_ref().map_or(self.next_exchange, |e| e.id)
    }

    fn record(&mut self, mut r: TraceRecord) {
        r.exchange = self.exchange_id();
        self.trace.push(r);
    }

    fn rec(&self, time: u64, node: NodeId, kind: TraceKind) -> TraceRecord {
        TraceRecord::new(time, node, kind, self.exchange_id())
    }

    fn new_packet(&mut self, node: NodeId, now: u64) {
        let Some(dst) = self.dst_of[node] else {
            return;
        };
        if !self.sending[node] || !self.associated[node] {
            return;
        }
        let p = Packet {
            id: self.next_packet,
            dst,
            bits: self.cfg.packet_bits,
            hol_since: secs(now),
        };
        self.next_packet += 1;
        self.nodes[node].queue.push_back(p);
        self.m.generated += 1;
        let mut r = self.rec(now, node, TraceKind::Hol);
        r.dsts = vec![dst];
        r.payload_bits = p.bits;
        self.record(r);
    }

    pub fn run(mut self) -> RunOutput {
        let dcf = self.dcf();
        for i in 0..self.cfg.n_nodes {
            self.new_packet(i, 0);
            let n = &mut self.nodes[i];
            n.cw = dcf.cw_min;
            n.backoff = rand::Rng::random_range(&mut self.rng.backoff, 0..=n.cw);
        }
        for &(t, node) in &self.cfg.disassociations.clone() {
            self.q.push(
                crate::mac::to_ns(t),
                EventKind::TimerExpiry,
                node,
                Payload::Timer(Timer::Disassociate),
            );
        }
        self.schedule_contention(0);

        while !self.done {
            let Some(ev) = self.q.pop() else {
                break;
            };
            self.m.events += 1;
            if self.m.events > self.cfg.max_events {
                self.m.truncated = true;
                log::warn!(
                    "event limit {} reached, stopping early",
                    self.cfg.max_events
                );
                break;
            }
            let now = ev.time;
            match ev.payload {
                Payload::Backoff { generation, slots } => {
                    self.on_backoff(now, ev.node, generation, slots)
                }
                Payload::Tx(id) => match ev.kind {
                    EventKind::TxStart => self.on_tx_start(now, id),
                    EventKind::TxEnd => self.on_tx_end(now, id),
                    EventKind::FrameDelivery => self.on_delivery(now, id),
                    _ => unreachable!("transmission payload on {:?}", ev.kind),
                },
                Payload::Timer(t) => self.on_timer(now, ev.node, t),
            }
        }
        if self.m.sim_time == 0.0 {
            self.m.sim_time = secs(self.q.now());
        }
        self.m.in_queue = self.nodes.iter().map(|n| n.queue.len() as u64).sum();
        self.m.finish();
        let trace_hash = self.trace.hash();
        RunOutput {
            metrics: self.m,
            trace: self.trace.into_records(),
            trace_hash,
            topology: self.topo,
        }
    }

    // ----- contention -------------------------------------------------

    fn contenders(&self) -> Vec<NodeId> {
        (0..self.cfg.n_nodes)
            .filter(|&i| self.associated[i] && !self.nodes[i].queue.is_empty())
            .collect()
    }

    fn schedule_contention(&mut self, idle_from: u64) {
        let c = self.contenders();
        let Some(&first) = c.iter().min_by_key(|&&i| (self.nodes[i].backoff, i)) else {
            self.done = true;
            self.m.sim_time = secs(idle_from);
            return;
        };
        let slots = self.nodes[first].backoff;
        self.backoff_generation += 1;
        let at = idle_from + self.t.difs + slots as u64 * self.t.slot;
        self.q.push(
            at,
            EventKind::SlotTick,
            first,
            Payload::Backoff {
                generation: self.backoff_generation,
                slots,
            },
        );
    }

    fn on_backoff(&mut self, now: u64, node: NodeId, generation: u64, slots: u32) {
        if generation != self.backoff_generation || self.ex.is_some() {
            return;
        }
        let mut r = self.rec(now, node, TraceKind::SlotTick);
        r.outcome = Outcome::Backoff;
        self.record(r);
        let contenders = self.contenders();
        let mut winners = Vec::new();
        for &i in &contenders {
            let n = &mut self.nodes[i];
            n.backoff -= slots.min(n.backoff);
            if n.backoff == 0 {
                winners.push(i);
            }
        }
        self.links.resample(&mut self.rng.fading);
        let id = self.next_exchange;
        self.next_exchange += 1;
        let src = winners[0];
        let dst = self.nodes[src].queue[0].dst;
        self.ex = Some(Exchange {
            id,
            senders: winners.clone(),
            src,
            dst,
            ..Exchange::default()
        });
        for w in winners {
            let p = self.nodes[w].queue[0];
            let f = Frame::rts(w, p.dst, p.bits, secs(self.t.rts));
            self.schedule_tx(now, f, None, None);
        }
    }

    // ----- transmissions ----------------------------------------------

    fn schedule_tx(
        &mut self,
        start: u64,
        frame: Frame,
        mode: Option<TxMode>,
        rates: Option<TraceRates>,
    ) -> usize {
        self.schedule_tx_full(start, frame, mode, rates, None, Outcome::None)
    }

    fn schedule_tx_full(
        &mut self,
        start: u64,
        frame: Frame,
        mode: Option<TxMode>,
        rates: Option<TraceRates>,
        group: Option<u64>,
        hint: Outcome,
    ) -> usize {
        let dur = crate::mac::to_ns(frame.duration);
        let node = frame.src;
        let id = self.txs.len();
        self.txs.push(TxRec {
            frame,
            end: start + dur,
            exchange: self.exchange_id(),
            collided: false,
            group,
            mode,
            rates,
            hint,
        });
        self.q
            .push(start, EventKind::TxStart, node, Payload::Tx(id));
        id
    }

    fn frame_record(&self, now: u64, kind: TraceKind, id: usize) -> TraceRecord {
        let tx = &self.txs[id];
        let mut r = TraceRecord::new(now, tx.frame.src, kind, tx.exchange);
        r.frame_kind = Some(tx.frame.kind);
        r.src = Some(tx.frame.src);
        r.dsts = tx.frame.dsts.clone();
        r.mode = tx.mode;
        r.payload_bits = tx.frame.payload_bits;
        r.rates = tx.rates;
        r
    }

    fn on_tx_start(&mut self, now: u64, id: usize) {
        let kind = self.txs[id].frame.kind;
        for &other in &self.active.clone() {
            let (a, b) = (&self.txs[id], &self.txs[other]);
            let tones = a.frame.kind == FrameKind::BusyTone && b.frame.kind == FrameKind::BusyTone;
            let sanctioned = a.group.is_some() && a.group == b.group;
            if !(tones || sanctioned) {
                self.txs[id].collided = true;
                self.txs[other].collided = true;
            }
        }
        self.active.push(id);
        let r = self.frame_record(now, TraceKind::TxStart, id);
        self.record(r);
        if kind == FrameKind::BusyTone {
            let (s1, _) = tone_slots(self.ex.as_ref().map_or(0, |e| e.cts_end), &self.t);
            if let Some(ex) = self.ex.as_mut() {
                if now == s1 {
                    ex.tone1 = true;
                } else {
                    ex.tone2 = true;
                }
            }
        }
        let end = self.txs[id].end;
        self.q.push(
            end,
            EventKind::TxEnd,
            self.txs[id].frame.src,
            Payload::Tx(id),
        );
    }

    fn on_tx_end(&mut self, now: u64, id: usize) {
        self.active.retain(|&a| a != id);
        let mut r = self.frame_record(now, TraceKind::TxEnd, id);
        if self.txs[id].collided {
            r.outcome = Outcome::Collision;
        }
        self.record(r);
        if self.txs[id].frame.kind != FrameKind::BusyTone {
            self.q.push(
                now,
                EventKind::FrameDelivery,
                self.txs[id].frame.src,
                Payload::Tx(id),
            );
        }
    }

    /// Estimate of `h(src -> i)` obtained from the frame preamble.
    fn measure(&mut self, src: NodeId, i: NodeId) -> crate::channel::ComplexGain {
        let h = self.links.true_gain(src, i);
        estimate_gain(
            h,
            self.cfg.n_pilots,
            self.cfg.tx_power / self.cfg.noise_var,
            &mut self.rng.estimation,
        )
    }

    fn overhear_all(
        &mut self,
        now: u64,
        frame: &Frame,
    ) -> Option<Vec<crate::mac::PiggybackEstimate>> {
        let mut reply = None;
        let slot = self.cfg.timing.slot;
        for i in 0..self.cfg.n_nodes {
            if i == frame.src || !self.associated[i] {
                continue;
            }
            let g = self.measure(frame.src, i);
            let out = on_overhear(&mut self.nodes[i], frame, g, secs(now), slot);
            if frame.kind == FrameKind::Rts && frame.dsts[0] == i {
                reply = out;
            }
        }
        reply
    }

    fn on_delivery(&mut self, now: u64, id: usize) {
        let collided = self.txs[id].collided;
        let frame = self.txs[id].frame.clone();
        let mut r = self.frame_record(now, TraceKind::FrameDelivery, id);
        r.outcome = if collided {
            Outcome::Collision
        } else if self.txs[id].hint != Outcome::None {
            self.txs[id].hint
        } else {
            Outcome::Ok
        };
        self.record(r);
        match (frame.kind, collided) {
            (FrameKind::Rts, true) => {
                self.m.rts_collisions += 1;
                let ex = self.ex.as_mut().expect("RTS inside an exchange");
                if !ex.timeout_armed {
                    ex.timeout_armed = true;
                    let src = ex.src;
                    self.q.push(
                        now + self.t.sifs + self.t.cts,
                        EventKind::TimerExpiry,
                        src,
                        Payload::Timer(Timer::CtsTimeout),
                    );
                }
            }
            (FrameKind::Rts, false) => self.on_rts(now, frame),
            (FrameKind::Cts, false) => self.on_cts(now, frame),
            (FrameKind::Ctc, true) => self.m.ctc_collisions += 1,
            (FrameKind::Ctc, false) => self.on_ctc(now, frame),
            _ => {}
        }
    }

    fn on_rts(&mut self, now: u64, rts: Frame) {
        let payload = self.overhear_all(now, &rts);
        let dst = rts.dsts[0];
        if let Some(ex) = self.ex.as_mut() {
            ex.rts = Some(rts.clone());
        }
        match payload {
            Some(pb) if self.associated[dst] => {
                let cts = Frame::cts(dst, rts.src, pb, secs(self.t.cts));
                self.schedule_tx(now + self.t.sifs, cts, None, None);
            }
            _ => {
                self.q.push(
                    now + self.t.sifs + self.t.cts,
                    EventKind::TimerExpiry,
                    rts.src,
                    Payload::Timer(Timer::CtsTimeout),
                );
            }
        }
    }

    fn relay_context(&self, now: u64) -> RelayContext {
        let tm = &self.cfg.timing;
        RelayContext {
            bandwidth: self.cfg.bandwidth,
            tx_power: self.cfg.tx_power,
            noise_var: self.cfg.noise_var,
            payload_bits: self.cfg.packet_bits as f64,
            n_max: self.cfg.n_relay_slots,
            slot: tm.slot,
            base_overhead: OverheadProfile {
                t_rts: tm.rts,
                t_cts: tm.cts,
                t_ctc: tm.ctc,
                t_sifs: tm.sifs,
                t_slot: tm.slot,
                t_rbkf: 0.0,
            },
            coop_form: self.cfg.coop_rate_form,
            coop_enabled: self.cfg.coop_enabled(),
            ancol_enabled: self.cfg.ancol_enabled(),
            rule: self.cfg.mode_rule,
            gain_map: self.cfg.rate_gain_map,
            backlog_window: self.cfg.backlog_window,
            max_age: match self.cfg.staleness {
                StalenessModel::Frozen => None,
                StalenessModel::Decay { max_age } => Some(max_age),
            },
            now: secs(now),
        }
    }

    fn on_cts(&mut self, now: u64, cts: Frame) {
        self.overhear_all(now, &cts);
        let (src, dst, rts, single) = {
            let ex = self.ex.as_mut().expect("CTS inside an exchange");
            ex.cts_end = now;
            (ex.src, ex.dst, ex.rts.clone(), ex.senders.len() == 1)
        };
        if !single {
            self.m.invariant_violations += 1;
        }
        if !self.cfg.cooperative() {
            self.q.push(
                now + self.t.sifs,
                EventKind::TimerExpiry,
                src,
                Payload::Timer(Timer::DataStart(TxMode::Direct)),
            );
            return;
        }
        let rts = rts.expect("RTS precedes CTS");
        let ctx = self.relay_context(now);
        let mut plans = Vec::new();
        for r in 0..self.cfg.n_nodes {
            if r == src || r == dst || !self.associated[r] || !self.nodes[r].roles.relay_candidate {
                continue;
            }
            if let Some(plan) = relay_overhear(&mut self.nodes[r], &rts, &cts, &ctx) {
                plans.push((r, plan));
            }
        }
        let (s1, s2) = tone_slots(now, &self.t);
        for &(r, plan) in &plans {
            let rates = Some(TraceRates {
                r_dir: plan.r_dir,
                r_coop: plan.r_coop,
                r_ancol: plan.r_ancol,
                r_norm: plan.r_norm,
                tone_slot: plan.tone_slot,
            });
            let mut rec = self.rec(now, r, TraceKind::Decision);
            rec.mode = Some(plan.decision.mode);
            rec.src = Some(src);
            rec.dsts = vec![dst];
            rec.rates = rates;
            self.record(rec);
            let at = if plan.tone_slot == 1 { s1 } else { s2 };
            self.schedule_tx(
                at,
                Frame::busy_tone(r, self.cfg.timing.slot),
                Some(plan.decision.mode),
                rates,
            );
        }
        self.ex.as_mut().unwrap().plans = plans;
        self.q.push(
            relay_window_start(now, &self.t),
            EventKind::TimerExpiry,
            src,
            Payload::Timer(Timer::ListenEnd),
        );
    }

    fn on_ctc(&mut self, now: u64, ctc: Frame) {
        self.overhear_all(now, &ctc);
        let relay = ctc.src;
        let ex = self.ex.as_mut().expect("CTC inside an exchange");
        let Some(&(_, plan)) = ex.plans.iter().find(|(r, _)| *r == relay) else {
            return;
        };
        ex.ctc_ok = Some(plan.decision);
        let src = ex.src;
        self.q.push(
            data_start_after_ctc(now, &self.t),
            EventKind::TimerExpiry,
            src,
            Payload::Timer(Timer::DataStart(plan.decision.mode)),
        );
    }

    // ----- timers -----------------------------------------------------

    fn on_timer(&mut self, now: u64, node: NodeId, t: Timer) {
        match t {
            Timer::Disassociate => {
                let mut r = self.rec(now, node, TraceKind::TimerExpiry);
                r.outcome = Outcome::None;
                self.record(r);
                // Applied at the next exchange boundary.
                self.pending_disassoc.push(node);
            }
            Timer::CtsTimeout => {
                let mut r = self.rec(now, node, TraceKind::TimerExpiry);
                r.outcome = Outcome::CtsTimeout;
                self.record(r);
                let senders = self
                    .ex
                    .as_ref()
                    .map(|e| e.senders.clone())
                    .unwrap_or_default();
                for s in senders {
                    self.attempt_failed(now, s);
                }
                self.end_exchange(now);
            }
            Timer::ListenEnd => self.on_listen_end(now, node),
            Timer::RelayBackoff => self.on_relay_backoff(now, node),
            Timer::CtcDeadline => {
                let ex = self.ex.as_ref().expect("deadline inside an exchange");
                if ex.ctc_ok.is_some() || ex.data_started {
                    return;
                }
                let mut r = self.rec(now, node, TraceKind::TimerExpiry);
                r.outcome = Outcome::Fallback;
                self.record(r);
                self.m.ctc_fallbacks += 1;
                self.start_data(now, TxMode::Direct);
            }
            Timer::DataStart(mode) => self.start_data(now, mode),
            Timer::ExchangeEnd => self.on_exchange_end(now, node),
        }
    }

    fn on_listen_end(&mut self, now: u64, node: NodeId) {
        let (cts_end, tone1, tone2) = {
            let ex = self.ex.as_ref().expect("listen inside an exchange");
            (ex.cts_end, ex.tone1, ex.tone2)
        };
        let mut r = self.rec(now, node, TraceKind::TimerExpiry);
        r.outcome = Outcome::ListenEnd;
        self.record(r);
        let plan = sender_after_cts(
            cts_end,
            tone1,
            tone2,
            &self.t,
            true,
            self.cfg.legacy_extra_slot,
            self.cfg.n_relay_slots,
        );
        match plan {
            SenderPlan::Direct { data_start } => {
                self.q.push(
                    data_start,
                    EventKind::TimerExpiry,
                    node,
                    Payload::Timer(Timer::DataStart(TxMode::Direct)),
                );
            }
            SenderPlan::AwaitCtc {
                window_start,
                deadline,
                ..
            } => {
                let plans = self.ex.as_ref().unwrap().plans.clone();
                for (r, p) in plans {
                    // A slot-1 tone tells plain-cooperation relays that a
                    // better proposal exists.
                    if tone1 && p.tone_slot == 2 {
                        let mut rec = self.rec(now, r, TraceKind::Decision);
                        rec.mode = Some(p.decision.mode);
                        rec.outcome = Outcome::Cancelled;
                        self.record(rec);
                        continue;
                    }
                    let mut rec = self.rec(now, r, TraceKind::Decision);
                    rec.mode = Some(p.decision.mode);
                    rec.outcome = Outcome::Armed;
                    rec.rates = Some(TraceRates {
                        r_dir: p.r_dir,
                        r_coop: p.r_coop,
                        r_ancol: p.r_ancol,
                        r_norm: p.r_norm,
                        tone_slot: p.tone_slot,
                    });
                    self.record(rec);
                    self.q.push(
                        window_start + p.backoff_slots as u64 * self.t.slot,
                        EventKind::TimerExpiry,
                        r,
                        Payload::Timer(Timer::RelayBackoff),
                    );
                }
                self.q.push(
                    deadline,
                    EventKind::TimerExpiry,
                    node,
                    Payload::Timer(Timer::CtcDeadline),
                );
            }
        }
    }

    fn on_relay_backoff(&mut self, now: u64, relay: NodeId) {
        let ex = self.ex.as_ref().expect("relay backoff inside an exchange");
        let mut r = self.rec(now, relay, TraceKind::TimerExpiry);
        if matches!(ex.ctc_start, Some(t) if t < now) {
            // Another relay's CTC is already on the air.
            r.outcome = Outcome::Cancelled;
            self.record(r);
            return;
        }
        let Some(&(_, plan)) = ex.plans.iter().find(|(n, _)| *n == relay) else {
            return;
        };
        let (src, dst) = (ex.src, ex.dst);
        r.mode = Some(plan.decision.mode);
        self.record(r);
        let grant = CtcGrant {
            mode: plan.decision.mode,
            primary: (src, dst),
            secondary: plan.decision.secondary_pair,
        };
        let ctc = Frame::ctc(relay, grant, secs(self.t.ctc));
        self.ex.as_mut().unwrap().ctc_start = Some(now);
        let rates = Some(TraceRates {
            r_dir: plan.r_dir,
            r_coop: plan.r_coop,
            r_ancol: plan.r_ancol,
            r_norm: plan.r_norm,
            tone_slot: plan.tone_slot,
        });
        self.schedule_tx(now, ctc, Some(plan.decision.mode), rates);
    }

    fn start_data(&mut self, now: u64, mode: TxMode) {
        let (src, dst, decision) = {
            let ex = self.ex.as_mut().expect("DATA inside an exchange");
            if ex.data_started {
                return;
            }
            ex.data_started = true;
            let d = match (mode, ex.ctc_ok) {
                (TxMode::Direct, _) | (_, None) => ModeDecision::direct(0.0),
                (_, Some(d)) => d,
            };
            (ex.src, ex.dst, d)
        };
        let bits = self.cfg.packet_bits;
        let secondary_active = match decision.secondary_pair {
            Some((s2, d2)) => {
                self.associated[s2]
                    && self.associated[d2]
                    && self.nodes[s2].queue.front().is_some_and(|p| p.dst == d2)
            }
            None => false,
        };
        let plan = {
            let mut adj = Adjudicator::new(
                self.cfg.fidelity,
                &self.links,
                self.phy,
                &self.constellation,
                self.cfg.bandwidth,
                &mut self.rng.phy,
            );
            match decision.mode {
                TxMode::Direct => direct_cycle(src, dst, bits, now, &self.t, &mut adj),
                TxMode::Coop => coop_cycle(&decision, src, dst, bits, now, &self.t, &mut adj),
                TxMode::Ancol => anc_ol_cycle(
                    &decision,
                    src,
                    dst,
                    secondary_active,
                    bits,
                    now,
                    &self.t,
                    &mut adj,
                ),
            }
        };
        self.m.modes.add(plan.mode);
        let mut r = self.rec(now, src, TraceKind::Decision);
        r.mode = Some(plan.mode);
        r.outcome = Outcome::DataStart;
        r.dsts = vec![dst];
        r.src = Some(src);
        self.record(r);

        self.group_seq += 1;
        let group = (plan.mode == TxMode::Ancol).then_some(self.group_seq);
        for tx in &plan.txs {
            let hint = plan
                .outcomes
                .iter()
                .find(|o| tx.frame.kind == FrameKind::Data && o.src == tx.frame.src)
                .map_or(Outcome::None, |o| {
                    if o.delivered {
                        Outcome::Delivered
                    } else {
                        Outcome::Failed
                    }
                });
            let g = if tx.start == now && tx.frame.kind == FrameKind::Data {
                group
            } else {
                None
            };
            self.schedule_tx_full(tx.start, tx.frame.clone(), Some(plan.mode), None, g, hint);
        }
        self.q.push(
            plan.end,
            EventKind::TimerExpiry,
            src,
            Payload::Timer(Timer::ExchangeEnd),
        );
        self.ex.as_mut().unwrap().plan = Some(plan);
    }

    // ----- exchange completion ----------------------------------------

    fn attempt_failed(&mut self, now: u64, s: NodeId) {
        let dcf = self.dcf();
        let dropped = dcf_backoff(
            &mut self.nodes[s],
            TxOutcome::Failure,
            &dcf,
            &mut self.rng.backoff,
        );
        if dropped.is_some() {
            self.m.dropped += 1;
            let r = self.rec(now, s, TraceKind::Drop);
            self.record(r);
            self.new_packet(s, now);
        } else {
            self.m.retransmissions += 1;
            let r = self.rec(now, s, TraceKind::Retry);
            self.record(r);
        }
    }

    fn on_exchange_end(&mut self, now: u64, node: NodeId) {
        let mut r = self.rec(now, node, TraceKind::TimerExpiry);
        r.outcome = Outcome::ExchangeEnd;
        self.record(r);
        let plan = self
            .ex
            .as_mut()
            .and_then(|e| e.plan.take())
            .expect("plan for exchange end");
        let dcf = self.dcf();
        for o in &plan.outcomes {
            let s = o.src;
            if o.delivered {
                let ack_end = plan
                    .txs
                    .iter()
                    .find(|t| t.frame.kind == FrameKind::Ack && t.frame.dsts[0] == s)
                    .map(|t| t.start + t.dur)
                    .expect("delivered packet has an ACK");
                let p = self.nodes[s]
                    .queue
                    .pop_front()
                    .expect("sender had a packet");
                self.m.delivered += 1;
                self.m.delivered_bits += p.bits as u64;
                self.m.delays.push(secs(ack_end) - p.hol_since);
                dcf_backoff(
                    &mut self.nodes[s],
                    TxOutcome::Success,
                    &dcf,
                    &mut self.rng.backoff,
                );
                self.flow_delivered[s] += 1;
                self.maybe_rotate(now, s);
                self.new_packet(s, now);
            } else {
                self.m.detection_failures += 1;
                self.attempt_failed(now, s);
            }
        }
        self.end_exchange(now);
    }

    fn maybe_rotate(&mut self, now: u64, s: NodeId) {
        let sc = self.cfg.scenario;
        if sc.kind != ScenarioKind::Rotating
            || !self.flow_delivered[s].is_multiple_of(sc.rotation_period)
        {
            return;
        }
        let Some(cur) = self.dst_of[s] else {
            return;
        };
        if let Some(next) = self.next_destination(s, cur) {
            self.dst_of[s] = Some(next);
            let mut r = self.rec(now, s, TraceKind::DstChange);
            r.dsts = vec![next];
            self.record(r);
        }
    }

    /// Next associated node after `cur`, cyclically, skipping `s` itself.
    fn next_destination(&self, s: NodeId, cur: NodeId) -> Option<NodeId> {
        let n = self.cfg.n_nodes;
        (1..=n)
            .map(|k| (cur + k) % n)
            .find(|&c| c != s && self.associated[c])
    }

    fn end_exchange(&mut self, now: u64) {
        self.ex = None;
        self.check_node_invariants();
        let pending = std::mem::take(&mut self.pending_disassoc);
        for node in pending {
            self.disassociate(now, node);
        }
        if self.m.delivered + self.m.dropped >= self.cfg.n_packets {
            self.done = true;
            self.m.sim_time = secs(now);
            return;
        }
        self.schedule_contention(now);
    }

    fn disassociate(&mut self, now: u64, node: NodeId) {
        if !self.associated[node] {
            return;
        }
        self.associated[node] = false;
        let r = self.rec(now, node, TraceKind::Disassoc);
        self.record(r);
        while self.nodes[node].queue.pop_front().is_some() {
            self.m.dropped += 1;
            let r = self.rec(now, node, TraceKind::Drop);
            self.record(r);
        }
        for i in 0..self.cfg.n_nodes {
            if i != node {
                anfl_maintain(&mut self.nodes[i], AnflEvent::Disassociation(node));
            }
        }
        for s in 0..self.cfg.n_nodes {
            if s == node || self.dst_of[s] != Some(node) || !self.associated[s] {
                continue;
            }
            match self.next_destination(s, node) {
                Some(next) => {
                    self.dst_of[s] = Some(next);
                    if let Some(p) = self.nodes[s].queue.front_mut() {
                        p.dst = next;
                    }
                    let mut r = self.rec(now, s, TraceKind::DstChange);
                    r.dsts = vec![next];
                    self.record(r);
                }
                None => {
                    self.dst_of[s] = None;
                    while self.nodes[s].queue.pop_front().is_some() {
                        self.m.dropped += 1;
                        let r = self.rec(now, s, TraceKind::Drop);
                        self.record(r);
                    }
                }
            }
        }
    }

    fn check_node_invariants(&mut self) {
        let (cw_min, cw_max, limit) = (self.cfg.cw_min, self.cfg.cw_max, self.cfg.retry_limit);
        let mut bad = 0;
        for n in &self.nodes {
            if !self.associated[n.id] {
                continue;
            }
            if n.backoff > n.cw || n.cw < cw_min || n.cw > cw_max || n.retry > limit {
                bad += 1;
            }
            if n.anfl.len() > n.anfl.capacity() {
                bad += 1;
            }
            for (j, assoc) in self.associated.iter().enumerate() {
                if !assoc
                    && (n.anfl.entries().iter().any(|e| e.mentions(j)) || n.estimates.mentions(j))
                {
                    bad += 1;
                }
            }
        }
        self.m.invariant_violations += bad;
    }
}

/// Validates `cfg` and runs one simulation.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, ConfigError> {
    Ok(Engine::new(cfg)?.run())
}
