use std::collections::BTreeMap;

use cancsim_core::sim::{check_conservation, check_trace, collect, run, TraceKind, TraceRecord};
use cancsim_core::{FrameKind, PhyFidelity, Protocol, Scenario, SimConfig, TxMode};

fn cfg(protocol: Protocol, fidelity: PhyFidelity, n_packets: u64, seed: u64) -> SimConfig {
    SimConfig {
        protocol,
        fidelity,
        n_packets,
        seed,
        ..SimConfig::default()
    }
}

fn assert_clean(c: &SimConfig) -> cancsim_core::RunOutput {
    let out = run(c).unwrap();
    let v = check_trace(&out.trace, c);
    assert!(
        v.is_empty(),
        "{} violations, first: {:?}",
        v.len(),
        v.first()
    );
    assert_eq!(check_conservation(&out.metrics), None);
    assert_eq!(out.metrics.invariant_violations, 0);
    assert!(!out.metrics.truncated);
    out
}

#[test]
fn same_seed_same_trace() {
    let c = cfg(Protocol::CancMac, PhyFidelity::Symbol, 300, 5);
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(a.trace_hash, b.trace_hash);
    assert_eq!(a.trace, b.trace);
    let other = run(&SimConfig { seed: 6, ..c }).unwrap();
    assert_ne!(a.trace_hash, other.trace_hash);
}

#[test]
fn canc_without_cooperative_modes_is_dcf() {
    for seed in [1, 2, 3] {
        let dcf = run(&cfg(Protocol::Dot11, PhyFidelity::Symbol, 400, seed)).unwrap();
        let canc = run(&SimConfig {
            disable_coop: true,
            disable_ancol: true,
            ..cfg(Protocol::CancMac, PhyFidelity::Symbol, 400, seed)
        })
        .unwrap();
        assert_eq!(dcf.trace_hash, canc.trace_hash);
        assert_eq!(dcf.trace, canc.trace);
    }
}

#[test]
fn traces_satisfy_protocol_invariants() {
    for p in Protocol::ALL {
        for fid in [PhyFidelity::Symbol, PhyFidelity::Rate] {
            for seed in 1..=3 {
                let out = assert_clean(&cfg(p, fid, 500, seed));
                assert_eq!(out.metrics.delivered + out.metrics.dropped, 500);
            }
        }
    }
}

#[test]
fn cancmac_uses_all_three_modes() {
    let out = assert_clean(&cfg(Protocol::CancMac, PhyFidelity::Rate, 3000, 1));
    let m = out.metrics.modes;
    assert!(m.direct > 0 && m.coop > 0 && m.ancol > 0, "{m:?}");
    let dcf = run(&cfg(Protocol::Dot11, PhyFidelity::Rate, 3000, 1)).unwrap();
    assert_eq!(dcf.metrics.modes.coop + dcf.metrics.modes.ancol, 0);
}

#[test]
fn trace_reconstruction_matches_engine_metrics() {
    for p in Protocol::ALL {
        let out = run(&cfg(p, PhyFidelity::Rate, 800, 9)).unwrap();
        let m = &out.metrics;
        let r = collect(&out.trace);
        assert_eq!(r.generated, m.generated);
        assert_eq!(r.delivered, m.delivered);
        assert_eq!(r.dropped, m.dropped);
        assert_eq!(r.in_queue, m.in_queue);
        assert_eq!(r.delivered_bits, m.delivered_bits);
        assert_eq!(r.modes, m.modes);
        assert_eq!(r.retransmissions, m.retransmissions);
        assert_eq!(r.detection_failures, m.detection_failures);
        assert_eq!(r.rts_collisions, m.rts_collisions);
        assert_eq!(r.ctc_collisions, m.ctc_collisions);
        assert_eq!(r.ctc_fallbacks, m.ctc_fallbacks);
        assert!((r.sim_time - m.sim_time).abs() < 1e-12);
        assert!((r.mean_delay() - m.mean_delay()).abs() < 1e-9);
    }
}

/// One backlogged sender and no possible relay: every cycle costs
/// DIFS + backoff + RTS + CTS + DATA + ACK + three SIFS.
#[test]
fn single_flow_matches_closed_form_dcf_cycle() {
    let c = SimConfig {
        n_nodes: 2,
        active_senders: Some(1),
        avg_snr_db: 60.0,
        ..cfg(Protocol::CancMac, PhyFidelity::Rate, 5000, 4)
    };
    let out = assert_clean(&c);
    let m = &out.metrics;
    assert_eq!(m.delivered, 5000);
    assert_eq!(m.rts_collisions, 0);
    let t = &c.timing;
    let mean_backoff = c.cw_min as f64 / 2.0;
    // Two cooperative listening slots are still spent when no relay answers.
    let cycle = t.difs
        + mean_backoff * t.slot
        + t.rts
        + t.cts
        + c.data_airtime()
        + t.ack
        + 3.0 * t.sifs
        + 2.0 * t.slot;
    let expect = c.packet_bits as f64 / cycle;
    let rel = (m.throughput_bps - expect).abs() / expect;
    assert!(
        rel < 0.01,
        "throughput {} vs closed form {expect}",
        m.throughput_bps
    );

    let dcf = run(&SimConfig {
        protocol: Protocol::Dot11,
        ..c.clone()
    })
    .unwrap();
    let cycle = cycle - 2.0 * t.slot;
    let expect = c.packet_bits as f64 / cycle;
    let rel = (dcf.metrics.throughput_bps - expect).abs() / expect;
    assert!(
        rel < 0.01,
        "throughput {} vs closed form {expect}",
        dcf.metrics.throughput_bps
    );
}

fn deliveries_by_sender(trace: &[TraceRecord]) -> BTreeMap<usize, Vec<(u64, usize)>> {
    // (time, destination) of every delivered packet, per sender.
    let mut out: BTreeMap<usize, Vec<(u64, usize)>> = BTreeMap::new();
    for r in trace {
        if r.kind == TraceKind::FrameDelivery
            && r.frame_kind == Some(FrameKind::Ack)
            && r.outcome == cancsim_core::sim::Outcome::Ok
        {
            out.entry(r.dsts[0])
                .or_default()
                .push((r.time_ns, r.src.unwrap()));
        }
    }
    out
}

#[test]
fn rotating_scenario_changes_destination_every_period() {
    let c = SimConfig {
        scenario: Scenario::s2(50),
        n_nodes: 4,
        ..cfg(Protocol::CancMac, PhyFidelity::Rate, 1200, 3)
    };
    let out = assert_clean(&c);
    for (s, d) in deliveries_by_sender(&out.trace) {
        for (k, chunk) in d.chunks(50).enumerate() {
            let first = chunk[0].1;
            assert!(
                chunk.iter().all(|&(_, dst)| dst == first),
                "sender {s} chunk {k}"
            );
            assert_ne!(first, s);
            if k > 0 {
                let prev = d[k * 50 - 1].1;
                let n = c.n_nodes;
                let mut want = (prev + 1) % n;
                if want == s {
                    want = (want + 1) % n;
                }
                assert_eq!(first, want, "sender {s} rotation {k}");
            }
        }
    }
    let changes = out
        .trace
        .iter()
        .filter(|r| r.kind == TraceKind::DstChange)
        .count();
    assert!(changes >= 1200 / 50 - c.n_nodes);
}

#[test]
fn fixed_pairs_never_change_destination() {
    let out = assert_clean(&cfg(Protocol::CancMac, PhyFidelity::Rate, 1000, 3));
    assert!(out.trace.iter().all(|r| r.kind != TraceKind::DstChange));
}

#[test]
fn disassociated_node_disappears_from_tables() {
    let c = SimConfig {
        disassociations: vec![(0.02, 3)],
        ..cfg(Protocol::CancMac, PhyFidelity::Rate, 1500, 2)
    };
    let out = assert_clean(&c);
    let t_dis = out
        .trace
        .iter()
        .find(|r| r.kind == TraceKind::Disassoc)
        .map(|r| r.time_ns)
        .expect("disassociation applied");
    assert!(t_dis >= 20_000_000);
    // Node 3 sends and receives nothing afterwards.
    for r in out.trace.iter().filter(|r| r.time_ns > t_dis) {
        if r.kind == TraceKind::TxStart {
            assert_ne!(r.src, Some(3), "{r}");
            assert!(!r.dsts.contains(&3), "{r}");
        }
    }
}

#[test]
fn overlapped_cycles_deliver_two_packets_at_once() {
    let out = assert_clean(&cfg(Protocol::CancMac, PhyFidelity::Symbol, 1500, 8));
    let mut ancol_data = 0;
    for r in &out.trace {
        if r.kind == TraceKind::TxStart
            && r.frame_kind == Some(FrameKind::Data)
            && r.mode == Some(TxMode::Ancol)
        {
            ancol_data += 1;
        }
    }
    assert_eq!(ancol_data, 3 * out.metrics.modes.ancol);
    assert!(out.metrics.modes.ancol > 0);
}
