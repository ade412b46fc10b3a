//! DATA-frame outcomes at the two PHY fidelity levels.
//!
//! Signals always travel over the true channel. In symbol fidelity the
//! detectors work with pilot estimates of the gains they need; cascaded
//! relay gains are estimated at the SNR of the forwarded pilot.

use rand::Rng;

use crate::channel::{
    estimate_gain, gain_power, ComplexGain, FlowRoles, LinkTable, NodeId, NoiseModel,
};
use crate::config::{PhyFidelity, SimConfig};
use crate::mac::DataAdjudicator;
use crate::phy::{
    compose_direct, forward, ml_combined_detect, ml_joint_detect, random_stream, relay_gain,
    relay_receive, CombiningParams, Constellation, JointParams, Observation, ObservationKind,
    RelayGain, SymbolStream,
};
use crate::rate::{r_ancol, r_coop, r_dir, AncolGains, CoopRateForm};

/// Shared physical parameters.
#[derive(Debug, Clone, Copy)]
pub struct PhyParams {
    pub tx_power: f64,
    pub noise: NoiseModel,
    pub n_pilots: u32,
    pub weighted: bool,
    pub coop_form: CoopRateForm,
    /// Linear SNR gap applied in rate fidelity.
    pub snr_gap: f64,
    pub payload_bits: u32,
}

impl PhyParams {
    pub fn from_config(c: &SimConfig) -> Self {
        PhyParams {
            tx_power: c.tx_power,
            noise: NoiseModel::new(c.noise_var, c.bandwidth).expect("validated config"),
            n_pilots: c.n_pilots,
            weighted: c.noise_weighted_detection,
            coop_form: c.coop_rate_form,
            snr_gap: 10f64.powf(c.rate_snr_gap_db / 10.0),
            payload_bits: c.packet_bits,
        }
    }

    fn pilot_snr(&self) -> f64 {
        self.tx_power / self.noise.variance()
    }
}

/// Symbol-level adjudication.
pub struct SymbolAdjudicator<'a, R: Rng> {
    pub links: &'a LinkTable,
    pub phy: PhyParams,
    pub constellation: &'a Constellation,
    pub rng: &'a mut R,
    /// Detectors use the true gains instead of pilot estimates.
    pub perfect_csi: bool,
}

impl<R: Rng> SymbolAdjudicator<'_, R> {
    fn h(&self, a: NodeId, b: NodeId) -> ComplexGain {
        self.links.true_gain(a, b)
    }

    fn est(&mut self, h: ComplexGain, pilot_snr: f64) -> ComplexGain {
        if self.perfect_csi {
            h
        } else {
            estimate_gain(h, self.phy.n_pilots, pilot_snr, self.rng)
        }
    }

    /// Estimate of a relayed cascade `h_sr h_rd g`.
    fn est_cascade(&mut self, h_sr: ComplexGain, h_rd: ComplexGain, g: RelayGain) -> ComplexGain {
        let snr = self.phy.pilot_snr() / (1.0 + gain_power(h_rd) * g.value() * g.value());
        self.est(h_sr * h_rd * g.value(), snr)
    }

    fn stream(&mut self, src: NodeId) -> SymbolStream {
        let n = self.phy.payload_bits as usize / self.constellation.bits_per_symbol();
        random_stream(n, self.constellation, src, self.rng)
    }

    fn silent(len: usize, src: NodeId) -> SymbolStream {
        SymbolStream {
            symbols: vec![num_complex::Complex64::new(0.0, 0.0); len],
            source: src,
        }
    }

    fn weights(&self, h_rd: ComplexGain, g: RelayGain) -> (f64, f64) {
        if self.phy.weighted {
            // Inverse noise variances, scaled by sigma^2 so that the
            // noiseless case stays finite.
            (1.0, 1.0 / (1.0 + gain_power(h_rd) * g.value() * g.value()))
        } else {
            (1.0, 1.0)
        }
    }
}

impl<R: Rng> DataAdjudicator for SymbolAdjudicator<'_, R> {
    fn direct(&mut self, src: NodeId, dst: NodeId) -> bool {
        let x = self.stream(src);
        let idle = Self::silent(x.len(), src);
        let h1 = self.h(src, dst);
        let p = self.phy.tx_power;
        let noise = self.phy.noise;
        let Ok(y) = compose_direct(
            &x,
            &idle,
            h1,
            ComplexGain::new(0.0, 0.0),
            p,
            &noise,
            self.rng,
        ) else {
            return false;
        };
        let h1e = self.est(h1, self.phy.pilot_snr());
        let params = CombiningParams {
            tx_power: p,
            dir: h1e,
            rel: ComplexGain::new(0.0, 0.0),
            w_dir: 1.0,
            w_rel: 0.0,
        };
        match ml_combined_detect(&y, None, &params, self.constellation, src) {
            Ok(d) => d.symbols == x.symbols,
            Err(_) => false,
        }
    }

    fn coop(&mut self, src: NodeId, dst: NodeId, relay: NodeId) -> bool {
        let x = self.stream(src);
        let idle = Self::silent(x.len(), src);
        let (h1, h2, h4) = (self.h(src, dst), self.h(src, relay), self.h(relay, dst));
        let p = self.phy.tx_power;
        let noise = self.phy.noise;
        let zero = ComplexGain::new(0.0, 0.0);
        let g = relay_gain(p, &[gain_power(h2)], noise.variance());
        let Ok(y_dir) = compose_direct(&x, &idle, h1, zero, p, &noise, self.rng) else {
            return false;
        };
        let Ok(at_relay) = relay_receive(&x, &idle, h2, zero, p, &noise, self.rng) else {
            return false;
        };
        let y_rel = forward(&at_relay, h4, g, &noise, self.rng);
        let h1e = self.est(h1, self.phy.pilot_snr());
        let rel = self.est_cascade(h2, h4, g);
        let (w_dir, w_rel) = self.weights(h4, g);
        let params = CombiningParams {
            tx_power: p,
            dir: h1e,
            rel,
            w_dir,
            w_rel,
        };
        match ml_combined_detect(&y_dir, Some(&y_rel), &params, self.constellation, src) {
            Ok(d) => d.symbols == x.symbols,
            Err(_) => false,
        }
    }

    fn ancol(&mut self, roles: &FlowRoles) -> (bool, bool) {
        let FlowRoles {
            src_a: s,
            dst_a: d,
            src_b: s2,
            dst_b: d2,
            relay: r,
        } = *roles;
        let xa = self.stream(s);
        let xb = self.stream(s2);
        let p = self.phy.tx_power;
        let noise = self.phy.noise;
        let (h1, h2, h3, h4) = (self.h(s, d), self.h(s, r), self.h(s, d2), self.h(r, d));
        let (h5, h6, h7, h8) = (self.h(r, d2), self.h(s2, d2), self.h(s2, r), self.h(s2, d));
        let g = relay_gain(p, &[gain_power(h2), gain_power(h7)], noise.variance());

        let Ok(y_d) = compose_direct(&xa, &xb, h1, h8, p, &noise, self.rng) else {
            return (false, false);
        };
        let Ok(y_d2) = compose_direct(&xb, &xa, h6, h3, p, &noise, self.rng) else {
            return (false, false);
        };
        let Ok(at_relay) = relay_receive(&xa, &xb, h2, h7, p, &noise, self.rng) else {
            return (false, false);
        };
        let rel_d = forward(&at_relay, h4, g, &noise, self.rng);
        let rel_d2 = forward(&at_relay, h5, g, &noise, self.rng);

        let ps = self.phy.pilot_snr();
        let decide = |me: &mut Self,
                      y_dir: &Observation,
                      y_rel: &Observation,
                      own: (NodeId, ComplexGain, ComplexGain),
                      other: (NodeId, ComplexGain, ComplexGain),
                      h_rd: ComplexGain,
                      truth: &SymbolStream| {
            let dir_a = me.est(own.1, ps);
            let dir_b = me.est(other.1, ps);
            let rel_a = me.est_cascade(own.2, h_rd, g);
            let rel_b = me.est_cascade(other.2, h_rd, g);
            let mut params =
                JointParams::new(p, dir_a, dir_b, rel_a, rel_b).with_sources(own.0, other.0);
            let (w_dir, w_rel) = me.weights(h_rd, g);
            params.w_dir = w_dir;
            params.w_rel = w_rel;
            match ml_joint_detect(y_dir, y_rel, &params, me.constellation, me.constellation) {
                Ok(dec) => dec.a.symbols == truth.symbols,
                Err(_) => false,
            }
        };
        let ok_a = decide(self, &y_d, &rel_d, (s, h1, h2), (s2, h8, h7), h4, &xa);
        let ok_b = decide(self, &y_d2, &rel_d2, (s2, h6, h7), (s, h3, h2), h5, &xb);
        debug_assert_eq!(rel_d.kind, ObservationKind::Relayed);
        (ok_a, ok_b)
    }
}

/// Rate-level adjudication: a packet survives when the payload rate does not
/// exceed the instantaneous achievable rate of the mode, evaluated on the
/// true gains.
pub struct RateAdjudicator<'a> {
    pub links: &'a LinkTable,
    pub phy: PhyParams,
    pub bandwidth: f64,
    pub bits_per_symbol: f64,
}

impl RateAdjudicator<'_> {
    fn p_eff(&self) -> f64 {
        self.phy.tx_power / self.phy.snr_gap
    }

    fn payload_rate(&self) -> f64 {
        self.bits_per_symbol * self.bandwidth
    }
}

impl DataAdjudicator for RateAdjudicator<'_> {
    fn direct(&mut self, src: NodeId, dst: NodeId) -> bool {
        let g1 = gain_power(self.links.true_gain(src, dst));
        r_dir(self.bandwidth, self.p_eff(), g1, self.phy.noise.variance()) >= self.payload_rate()
    }

    fn coop(&mut self, src: NodeId, dst: NodeId, relay: NodeId) -> bool {
        let nv = self.phy.noise.variance();
        let g1 = gain_power(self.links.true_gain(src, dst));
        let g2 = gain_power(self.links.true_gain(src, relay));
        let g4 = gain_power(self.links.true_gain(relay, dst));
        let g = relay_gain(self.phy.tx_power, &[g2], nv);
        let rc = r_coop(
            self.bandwidth,
            self.p_eff(),
            g1,
            g2,
            g4,
            g,
            nv,
            self.phy.coop_form,
        );
        // One packet over two DATA slots.
        rc >= self.payload_rate() / 2.0
    }

    fn ancol(&mut self, roles: &FlowRoles) -> (bool, bool) {
        let nv = self.phy.noise.variance();
        let h = |a, b| self.links.true_gain(a, b);
        let FlowRoles {
            src_a: s,
            dst_a: d,
            src_b: s2,
            dst_b: d2,
            relay: r,
        } = *roles;
        let (h1, h2, h3, h4) = (h(s, d), h(s, r), h(s, d2), h(r, d));
        let (h5, h6, h7, h8) = (h(r, d2), h(s2, d2), h(s2, r), h(s2, d));
        let g = relay_gain(self.phy.tx_power, &[gain_power(h2), gain_power(h7)], nv);
        let pe = self.p_eff();
        let at_d = r_ancol(
            self.bandwidth,
            pe,
            &AncolGains { h1, h2, h4, h7, h8 },
            g,
            nv,
        );
        let at_d2 = r_ancol(
            self.bandwidth,
            pe,
            &AncolGains {
                h1: h6,
                h2: h7,
                h4: h5,
                h7: h2,
                h8: h3,
            },
            g,
            nv,
        );
        // Two packets over two DATA slots: the sum rate must carry the
        // payload rate at each receiver.
        let need = self.payload_rate();
        (at_d >= need, at_d2 >= need)
    }
}

/// Either adjudicator behind one type, chosen by the configured fidelity.
pub enum Adjudicator<'a, R: Rng> {
    Symbol(SymbolAdjudicator<'a, R>),
    Rate(RateAdjudicator<'a>),
}

impl<'a, R: Rng> Adjudicator<'a, R> {
    pub fn new(
        fidelity: PhyFidelity,
        links: &'a LinkTable,
        phy: PhyParams,
        constellation: &'a Constellation,
        bandwidth: f64,
        rng: &'a mut R,
    ) -> Self {
        match fidelity {
            PhyFidelity::Symbol => Adjudicator::Symbol(SymbolAdjudicator {
                links,
                phy,
                constellation,
                rng,
                perfect_csi: false,
            }),
            PhyFidelity::Rate => Adjudicator::Rate(RateAdjudicator {
                links,
                phy,
                bandwidth,
                bits_per_symbol: constellation.bits_per_symbol() as f64,
            }),
        }
    }
}

impl<R: Rng> DataAdjudicator for Adjudicator<'_, R> {
    fn direct(&mut self, src: NodeId, dst: NodeId) -> bool {
        match self {
            Adjudicator::Symbol(a) => a.direct(src, dst),
            Adjudicator::Rate(a) => a.direct(src, dst),
        }
    }

    fn coop(&mut self, src: NodeId, dst: NodeId, relay: NodeId) -> bool {
        match self {
            Adjudicator::Symbol(a) => a.coop(src, dst, relay),
            Adjudicator::Rate(a) => a.coop(src, dst, relay),
        }
    }

    fn ancol(&mut self, roles: &FlowRoles) -> (bool, bool) {
        match self {
            Adjudicator::Symbol(a) => a.ancol(roles),
            Adjudicator::Rate(a) => a.ancol(roles),
        }
    }
}
