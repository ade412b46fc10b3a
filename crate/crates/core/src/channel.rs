//! Rayleigh block-fading links, pilot-based channel estimation and the
//! channel naming used by the two-flow relay topology.
//!
//! Every ordered node pair `(i, j)` owns one complex coefficient `h(i -> j)`.
//! Gains are held constant for one fading block and redrawn at block
//! boundaries with [`LinkTable::resample`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::ConfigError;

/// Node identifier inside one cell.
pub type NodeId = usize;

/// A complex channel coefficient (true or estimated).
pub type ComplexGain = Complex64;

/// Power gain `|h|^2` of a channel coefficient.
#[inline]
pub fn gain_power(h: ComplexGain) -> f64 {
    h.norm_sqr()
}

/// AWGN description shared by every receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    variance: f64,
    bandwidth: f64,
}

impl NoiseModel {
    pub fn new(variance: f64, bandwidth: f64) -> Result<Self, ConfigError> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(ConfigError::OutOfRange {
                key: "noise_var",
                value: variance.to_string(),
                expected: "> 0",
            });
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(ConfigError::OutOfRange {
                key: "bandwidth_hz",
                value: bandwidth.to_string(),
                expected: "> 0",
            });
        }
        Ok(NoiseModel {
            variance,
            bandwidth,
        })
    }

    /// Noise variance in watts.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Channel bandwidth in hertz.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Noiseless receiver, only meaningful for symbol-level tests.
    pub fn noiseless(bandwidth: f64) -> Self {
        NoiseModel {
            variance: 0.0,
            bandwidth,
        }
    }
}

/// Draws a circularly-symmetric complex Gaussian with total variance `variance`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    if variance <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let sigma = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sigma * re, sigma * im)
}

/// Draws one Rayleigh block-fading coefficient with `E|h|^2 = avg_power`.
pub fn sample_block_gain<R: Rng + ?Sized>(avg_power: f64, rng: &mut R) -> ComplexGain {
    debug_assert!(avg_power >= 0.0);
    complex_gaussian(avg_power.max(0.0), rng)
}

/// Pilot-averaged least-squares estimate of `true_gain`.
///
/// The error is complex Gaussian with per-component variance
/// `1 / (2 * n_pilots * pilot_snr)`, where `pilot_snr` is the transmit
/// SNR `P / sigma^2` seen by a unit-gain channel.
pub fn estimate_gain<R: Rng + ?Sized>(
    true_gain: ComplexGain,
    n_pilots: u32,
    pilot_snr: f64,
    rng: &mut R,
) -> ComplexGain {
    debug_assert!(n_pilots >= 1 && pilot_snr > 0.0);
    let err_var = 1.0 / (n_pilots.max(1) as f64 * pilot_snr);
    true_gain + complex_gaussian(err_var, rng)
}

/// Received SNR `P * gamma / sigma^2`.
#[inline]
pub fn snr(tx_power: f64, gain_power: f64, noise_var: f64) -> f64 {
    tx_power * gain_power / noise_var
}

/// One entry of the link table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub true_gain: ComplexGain,
    /// Most recent estimate made by the receiving endpoint, if any.
    pub est_gain: Option<ComplexGain>,
    /// Simulated time of that estimate in seconds.
    pub est_time: f64,
}

/// True (and most recently measured) gains of every ordered pair in the cell.
#[derive(Debug, Clone)]
pub struct LinkTable {
    n: usize,
    avg_power: Vec<f64>,
    links: Vec<LinkState>,
    reciprocal: bool,
}

impl LinkTable {
    /// `avg_power` is a row-major `n x n` matrix of mean power gains.
    pub fn new(n: usize, avg_power: Vec<f64>, reciprocal: bool) -> Self {
        assert_eq!(avg_power.len(), n * n, "avg_power must be n x n");
        let links = vec![
            LinkState {
                true_gain: Complex64::new(0.0, 0.0),
                est_gain: None,
                est_time: 0.0,
            };
            n * n
        ];
        LinkTable {
            n,
            avg_power,
            links,
            reciprocal,
        }
    }

    pub fn len_nodes(&self) -> usize {
        self.n
    }

    pub fn is_reciprocal(&self) -> bool {
        self.reciprocal
    }

    pub fn avg_power(&self, from: NodeId, to: NodeId) -> f64 {
        self.avg_power[from * self.n + to]
    }

    /// Starts a new fading block: every link gets a fresh Rayleigh draw.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if self.reciprocal && j < i {
                    self.links[i * n + j].true_gain = self.links[j * n + i].true_gain;
                    continue;
                }
                let h = sample_block_gain(self.avg_power[i * n + j], rng);
                self.links[i * n + j].true_gain = h;
            }
        }
    }

    pub fn true_gain(&self, from: NodeId, to: NodeId) -> ComplexGain {
        self.links[from * self.n + to].true_gain
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> &LinkState {
        &self.links[from * self.n + to]
    }

    /// Records an estimate of `h(from -> to)` taken at `time`.
    ///
    /// Estimate times never move backwards for a given entry.
    pub fn record_estimate(&mut self, from: NodeId, to: NodeId, est: ComplexGain, time: f64) {
        let n = self.n;
        let mut write = |idx: usize| {
            let e = &mut self.links[idx];
            if time >= e.est_time || e.est_gain.is_none() {
                e.est_gain = Some(est);
                e.est_time = time;
            }
        };
        write(from * n + to);
        if self.reciprocal {
            write(to * n + from);
        }
    }

    /// Overrides a true gain. Used by tests and hand-built scenarios.
    pub fn set_true_gain(&mut self, from: NodeId, to: NodeId, h: ComplexGain) {
        let n = self.n;
        self.links[from * n + to].true_gain = h;
        if self.reciprocal {
            self.links[to * n + from].true_gain = h;
        }
    }
}

/// Roles in the two-flow relay topology: `src_a -> dst_a` and
/// `src_b -> dst_b`, both helped by `relay`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowRoles {
    pub src_a: NodeId,
    pub dst_a: NodeId,
    pub src_b: NodeId,
    pub dst_b: NodeId,
    pub relay: NodeId,
}

/// Channel labels of the two-flow topology.
///
/// | label | link            |
/// |-------|-----------------|
/// | H1    | src_a -> dst_a  |
/// | H2    | src_a -> relay  |
/// | H3    | src_a -> dst_b  |
/// | H4    | relay -> dst_a  |
/// | H5    | relay -> dst_b  |
/// | H6    | src_b -> dst_b  |
/// | H7    | src_b -> relay  |
/// | H8    | src_b -> dst_a  |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelIndex {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
    H8,
}

impl ChannelIndex {
    pub const ALL: [ChannelIndex; 8] = [
        ChannelIndex::H1,
        ChannelIndex::H2,
        ChannelIndex::H3,
        ChannelIndex::H4,
        ChannelIndex::H5,
        ChannelIndex::H6,
        ChannelIndex::H7,
        ChannelIndex::H8,
    ];

    /// `(transmitter, receiver)` of this channel for the given roles.
    pub fn endpoints(self, r: &FlowRoles) -> (NodeId, NodeId) {
        match self {
            ChannelIndex::H1 => (r.src_a, r.dst_a),
            ChannelIndex::H2 => (r.src_a, r.relay),
            ChannelIndex::H3 => (r.src_a, r.dst_b),
            ChannelIndex::H4 => (r.relay, r.dst_a),
            ChannelIndex::H5 => (r.relay, r.dst_b),
            ChannelIndex::H6 => (r.src_b, r.dst_b),
            ChannelIndex::H7 => (r.src_b, r.relay),
            ChannelIndex::H8 => (r.src_b, r.dst_a),
        }
    }
}

impl FlowRoles {
    /// The same topology seen from the second receiver: flows swap roles,
    /// so H1<->H6, H2<->H7, H3<->H8 and H4<->H5.
    pub fn mirrored(&self) -> FlowRoles {
        FlowRoles {
            src_a: self.src_b,
            dst_a: self.dst_b,
            src_b: self.src_a,
            dst_b: self.dst_a,
            relay: self.relay,
        }
    }

    /// True when all five roles are held by distinct nodes.
    pub fn is_valid(&self) -> bool {
        let ids = [self.src_a, self.dst_a, self.src_b, self.dst_b, self.relay];
        (0..5).all(|i| (i + 1..5).all(|j| ids[i] != ids[j]))
    }
}
