//! Shared fixtures for the benchmarks.

use cancsim_core::channel::{complex_gaussian, gain_power};
use cancsim_core::phy::{random_stream, relay_gain, JointParams, Observation, ObservationKind};
use cancsim_core::{Constellation, Modulation, PhyFidelity, Protocol, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default cell with the trace turned off.
pub fn engine_config(protocol: Protocol, fidelity: PhyFidelity, n_packets: u64) -> SimConfig {
    SimConfig {
        protocol,
        fidelity,
        n_packets,
        record_trace: false,
        ..SimConfig::default()
    }
}

/// One overlapped reception at 20 dB: direct and relayed observations of
/// `n` symbol pairs plus matching detector parameters.
pub fn joint_instance(n: usize, seed: u64) -> (Observation, Observation, JointParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Constellation::new(Modulation::Qpsk);
    let (p, nv) = (0.1, 1e-9);
    let omega = 100.0 * nv / p;
    let h: Vec<_> = (0..5).map(|_| complex_gaussian(omega, &mut rng)).collect();
    let (h1, h2, h4, h7, h8) = (h[0], h[1], h[2], h[3], h[4]);
    let g = relay_gain(p, &[gain_power(h2), gain_power(h7)], nv);
    let xa = random_stream(n, &c, 0, &mut rng);
    let xb = random_stream(n, &c, 2, &mut rng);
    let sp = p.sqrt();
    let mut yd = Vec::with_capacity(n);
    let mut yr = Vec::with_capacity(n);
    for (a, b) in xa.symbols.iter().zip(&xb.symbols) {
        yd.push(sp * (h1 * a + h8 * b) + complex_gaussian(nv, &mut rng));
        let at_relay = sp * (h2 * a + h7 * b) + complex_gaussian(nv, &mut rng);
        yr.push(h4 * g.value() * at_relay + complex_gaussian(nv, &mut rng));
    }
    let params = JointParams::new(p, h1, h8, h2 * h4 * g.value(), h7 * h4 * g.value())
        .noise_weighted(nv, h4, g);
    (
        Observation {
            samples: yd,
            kind: ObservationKind::Direct,
        },
        Observation {
            samples: yr,
            kind: ObservationKind::Relayed,
        },
        params,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use cancsim_core::phy::ml_joint_detect;

    #[test]
    fn instance_is_detectable() {
        let (od, or, p) = joint_instance(64, 1);
        let c = Constellation::new(Modulation::Qpsk);
        let d = ml_joint_detect(&od, &or, &p, &c, &c).unwrap();
        assert_eq!(d.a.len(), 64);
        assert!(d.a_detectable && d.b_detectable);
    }
}
