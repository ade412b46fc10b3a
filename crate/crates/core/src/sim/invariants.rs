//! Protocol invariants checked on a finished trace.
//!
//! The checks only look at trace records, so they also serve as a
//! conformance test for traces produced elsewhere.

use std::collections::BTreeMap;

use super::metrics::Metrics;
use super::trace::{Outcome, TraceKind, TraceRecord};
use crate::config::SimConfig;
use crate::mac::{FrameKind, TimingNs, TxMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub time_ns: u64,
    pub exchange: u64,
    pub rule: &'static str,
    pub detail: String,
}

struct Checker<'a> {
    cfg: &'a SimConfig,
    t: TimingNs,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn fail(&mut self, r: &TraceRecord, rule: &'static str, detail: String) {
        self.out.push(Violation {
            time_ns: r.time_ns,
            exchange: r.exchange,
            rule,
            detail,
        });
    }

    fn exchange(&mut self, recs: &[&TraceRecord]) {
        let is = |r: &&&TraceRecord, kind: TraceKind, fk: FrameKind| {
            r.kind == kind && r.frame_kind == Some(fk)
        };

        // One completed handshake per contention round.
        let ok_cts: Vec<_> = recs
            .iter()
            .filter(|r| is(r, TraceKind::FrameDelivery, FrameKind::Cts) && r.outcome == Outcome::Ok)
            .collect();
        if ok_cts.len() > 1 {
            self.fail(
                recs[0],
                "single_handshake",
                format!("{} CTS delivered", ok_cts.len()),
            );
        }
        let Some(cts) = ok_cts.first() else {
            return;
        };
        let cts_end = cts.time_ns;
        let s1 = cts_end + self.t.sifs;
        let s2 = s1 + self.t.slot;

        let tones: Vec<_> = recs
            .iter()
            .filter(|r| is(r, TraceKind::TxStart, FrameKind::BusyTone))
            .collect();
        for tone in &tones {
            let Some(rates) = tone.rates else {
                self.fail(
                    tone,
                    "tone_rates",
                    "busy tone without rate estimates".into(),
                );
                continue;
            };
            let (at, mode) = if rates.tone_slot == 1 {
                (s1, TxMode::Ancol)
            } else {
                (s2, TxMode::Coop)
            };
            if tone.time_ns != at || tone.mode != Some(mode) {
                self.fail(
                    tone,
                    "tone_slot",
                    format!(
                        "slot {} tone at {} for {:?}",
                        rates.tone_slot, tone.time_ns, tone.mode
                    ),
                );
            }
            if !(rates.r_coop > rates.r_dir) {
                self.fail(
                    tone,
                    "tone_guard",
                    format!("tone with r_coop {} <= r_dir {}", rates.r_coop, rates.r_dir),
                );
            }
        }
        let tone1 = tones.iter().any(|r| r.time_ns == s1);

        let ctcs: Vec<_> = recs
            .iter()
            .filter(|r| is(r, TraceKind::TxStart, FrameKind::Ctc))
            .collect();
        for c in &ctcs {
            if c.dsts.len() != 2 || c.dsts[0] == c.dsts[1] {
                self.fail(c, "ctc_two_dsts", format!("CTC dsts {:?}", c.dsts));
            }
        }
        let won: Vec<_> = recs
            .iter()
            .filter(|r| is(r, TraceKind::FrameDelivery, FrameKind::Ctc) && r.outcome == Outcome::Ok)
            .collect();
        if let Some(w) = won.first() {
            let want = if tone1 { TxMode::Ancol } else { TxMode::Coop };
            if w.mode != Some(want) {
                self.fail(
                    w,
                    "ctc_mode",
                    format!("CTC mode {:?}, tones imply {:?}", w.mode, want),
                );
            }
            let best = recs
                .iter()
                .filter(|r| r.kind == TraceKind::Decision && r.outcome == Outcome::Armed)
                .filter_map(|r| r.rates.map(|x| x.r_norm))
                .fold(f64::NEG_INFINITY, f64::max);
            let mine = w.rates.map_or(f64::NAN, |x| x.r_norm);
            if !(mine >= best) {
                self.fail(
                    w,
                    "ctc_winner_max",
                    format!("winner r_norm {mine} below armed max {best}"),
                );
            }
        }

        let datas: Vec<_> = recs
            .iter()
            .filter(|r| is(r, TraceKind::TxStart, FrameKind::Data))
            .collect();
        let Some(first) = datas.first() else {
            return;
        };
        if tones.is_empty() {
            let expect = if !self.cfg.cooperative() {
                cts_end + self.t.sifs
            } else if self.cfg.legacy_extra_slot {
                s2 + 2 * self.t.slot
            } else {
                s2 + self.t.slot
            };
            if first.time_ns != expect || first.mode != Some(TxMode::Direct) {
                self.fail(
                    first,
                    "silent_direct",
                    format!(
                        "DATA at {} ({:?}), expected DIRECT at {expect}",
                        first.time_ns, first.mode
                    ),
                );
            }
        }

        if first.mode == Some(TxMode::Ancol) {
            // Trace order: RTS, CTS, slot-1 tone and CTC all precede DATA.
            let pos = |pred: &dyn Fn(&TraceRecord) -> bool| recs.iter().position(|r| pred(r));
            let data_pos =
                pos(&|r| r.kind == TraceKind::TxStart && r.frame_kind == Some(FrameKind::Data))
                    .unwrap();
            let needs: [(&str, Option<usize>); 4] = [
                (
                    "RTS",
                    pos(&|r| r.kind == TraceKind::TxStart && r.frame_kind == Some(FrameKind::Rts)),
                ),
                (
                    "CTS",
                    pos(&|r| r.kind == TraceKind::TxStart && r.frame_kind == Some(FrameKind::Cts)),
                ),
                (
                    "slot-1 tone",
                    pos(&|r| {
                        r.kind == TraceKind::TxStart
                            && r.frame_kind == Some(FrameKind::BusyTone)
                            && r.rates.is_some_and(|x| x.tone_slot == 1)
                    }),
                ),
                (
                    "CTC",
                    pos(&|r| {
                        r.kind == TraceKind::FrameDelivery
                            && r.frame_kind == Some(FrameKind::Ctc)
                            && r.outcome == Outcome::Ok
                            && r.mode == Some(TxMode::Ancol)
                    }),
                ),
            ];
            for (name, p) in needs {
                if !p.is_some_and(|p| p < data_pos) {
                    self.fail(
                        first,
                        "ancol_preamble",
                        format!("ANCOL DATA without preceding {name}"),
                    );
                }
            }
            let phase1 = datas.iter().filter(|r| r.time_ns == first.time_ns).count();
            let phase2: Vec<_> = datas.iter().filter(|r| r.time_ns > first.time_ns).collect();
            if phase1 != 2 || phase2.len() != 1 || phase2[0].dsts.len() != 2 {
                self.fail(
                    first,
                    "ancol_shape",
                    format!("{phase1} overlapped DATA, {} relay forwards", phase2.len()),
                );
            }
        }
    }
}

/// Checks trace-level protocol invariants. An empty result means the trace
/// conforms.
pub fn check_trace(records: &[TraceRecord], cfg: &SimConfig) -> Vec<Violation> {
    let mut c = Checker {
        cfg,
        t: TimingNs::from_config(cfg),
        out: Vec::new(),
    };
    let mut by_exchange: BTreeMap<u64, Vec<&TraceRecord>> = BTreeMap::new();
    let mut last = 0;
    for r in records {
        if r.time_ns < last {
            c.fail(
                r,
                "time_order",
                format!("time {} after {}", r.time_ns, last),
            );
        }
        last = r.time_ns;
        by_exchange.entry(r.exchange).or_default().push(r);
    }
    for recs in by_exchange.values() {
        c.exchange(recs);
    }
    c.out
}

/// Every generated packet is delivered, dropped or still queued.
pub fn check_conservation(m: &Metrics) -> Option<Violation> {
    (m.delivered + m.dropped + m.in_queue != m.generated).then(|| Violation {
        time_ns: (m.sim_time * 1e9) as u64,
        exchange: 0,
        rule: "conservation",
        detail: format!(
            "delivered {} + dropped {} + queued {} != generated {}",
            m.delivered, m.dropped, m.in_queue, m.generated
        ),
    })
}
