//! Symbol-level transmission model.
//!
//! Two senders `A` and `B` transmit aligned symbol streams. A receiver sees
//! the direct superposition `sqrt(P) (h_a x_A + h_b x_B) + n` and, one phase
//! later, the amplify-and-forward copy of the relay's own superposition.
//! [`ml_joint_detect`] recovers both streams by exhaustive search over all
//! `|X_A| * |X_B|` candidate pairs.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_gaussian, gain_power, ComplexGain, NodeId, NoiseModel};
use crate::error::PhyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        }
    }
}

/// Unit-average-power symbol dictionary.
///
/// Point `k` carries the bit pattern of `k` (MSB first); the QPSK layout is
/// Gray coded so neighbouring points differ in one bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    scheme: Modulation,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(scheme: Modulation) -> Self {
        let points = match scheme {
            Modulation::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Modulation::Qpsk => (0..4u8)
                .map(|k| {
                    let b0 = (k >> 1) & 1;
                    let b1 = k & 1;
                    Complex64::new(
                        (1.0 - 2.0 * b0 as f64) * FRAC_1_SQRT_2,
                        (1.0 - 2.0 * b1 as f64) * FRAC_1_SQRT_2,
                    )
                })
                .collect(),
        };
        Constellation { scheme, points }
    }

    pub fn scheme(&self) -> Modulation {
        self.scheme
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.scheme.bits_per_symbol()
    }

    /// Index of the point closest to `y` (lowest index on ties).
    pub fn nearest(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Index of `s` in the dictionary, if it is a constellation point.
    pub fn index_of(&self, s: Complex64) -> Option<usize> {
        self.points.iter().position(|p| *p == s)
    }
}

/// Transmitted symbols of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub symbols: Vec<Complex64>,
    pub source: NodeId,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    Direct,
    Relayed,
}

/// Samples seen by a receiver over the overlapped symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub samples: Vec<Complex64>,
    pub kind: ObservationKind,
}

/// Amplify-and-forward gain applied by the relay.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RelayGain(f64);

impl RelayGain {
    /// Panics if `g` is negative or not finite.
    pub fn new(g: f64) -> Self {
        assert!(
            g.is_finite() && g >= 0.0,
            "relay gain must be finite and >= 0"
        );
        RelayGain(g)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Gray-maps `bits` (0/1 values) onto `constellation`.
pub fn modulate(
    bits: &[u8],
    constellation: &Constellation,
    source: NodeId,
) -> Result<SymbolStream, PhyError> {
    let per = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(per) {
        return Err(PhyError::BitLength {
            bits: bits.len(),
            per_symbol: per,
        });
    }
    let symbols = bits
        .chunks(per)
        .map(|c| {
            let k = c
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            constellation.points[k]
        })
        .collect();
    Ok(SymbolStream { symbols, source })
}

/// Hard-decision demapping of arbitrary samples to bits.
pub fn demodulate(samples: &[Complex64], constellation: &Constellation) -> Vec<u8> {
    let per = constellation.bits_per_symbol();
    let mut bits = Vec::with_capacity(samples.len() * per);
    for &y in samples {
        let k = constellation.nearest(y);
        for shift in (0..per).rev() {
            bits.push(((k >> shift) & 1) as u8);
        }
    }
    bits
}

/// Uniformly random symbols, used for payloads in the event engine.
pub fn random_stream<R: Rng + ?Sized>(
    len: usize,
    constellation: &Constellation,
    source: NodeId,
    rng: &mut R,
) -> SymbolStream {
    let m = constellation.len();
    let symbols = (0..len)
        .map(|_| constellation.points[rng.random_range(0..m)])
        .collect();
    SymbolStream { symbols, source }
}

/// AF gain that caps the relay's mean output power at `P`:
/// `g = sqrt(P / (P * sum(gamma_in) + sigma^2))`.
pub fn relay_gain(tx_power: f64, incident_gains: &[f64], noise_var: f64) -> RelayGain {
    debug_assert!(tx_power > 0.0);
    let total: f64 = incident_gains.iter().sum();
    let denom = tx_power * total + noise_var;
    if denom <= 0.0 {
        return RelayGain(0.0);
    }
    RelayGain((tx_power / denom).sqrt())
}

fn check_len(a: &SymbolStream, b: &SymbolStream) -> Result<usize, PhyError> {
    if a.len() != b.len() {
        return Err(PhyError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.len())
}

/// `y = sqrt(P) h_dir x_A + sqrt(P) h_cross x_B + n`.
pub fn compose_direct<R: Rng + ?Sized>(
    x_a: &SymbolStream,
    x_b: &SymbolStream,
    h_dir: ComplexGain,
    h_cross: ComplexGain,
    tx_power: f64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Observation, PhyError> {
    check_len(x_a, x_b)?;
    let sp = tx_power.sqrt();
    let samples = x_a
        .symbols
        .iter()
        .zip(&x_b.symbols)
        .map(|(&a, &b)| sp * h_dir * a + sp * h_cross * b + complex_gaussian(noise.variance(), rng))
        .collect();
    Ok(Observation {
        samples,
        kind: ObservationKind::Direct,
    })
}

/// The relay's own received superposition `sqrt(P) h_a x_A + sqrt(P) h_b x_B + n_R`.
pub fn relay_receive<R: Rng + ?Sized>(
    x_a: &SymbolStream,
    x_b: &SymbolStream,
    h_sr_a: ComplexGain,
    h_sr_b: ComplexGain,
    tx_power: f64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<Complex64>, PhyError> {
    Ok(compose_direct(x_a, x_b, h_sr_a, h_sr_b, tx_power, noise, rng)?.samples)
}

/// Destination view of the relay's amplified copy: `h_rd g y_R + n_D`.
pub fn forward<R: Rng + ?Sized>(
    relay_rx: &[Complex64],
    h_rd: ComplexGain,
    g: RelayGain,
    noise: &NoiseModel,
    rng: &mut R,
) -> Observation {
    let k = h_rd * g.value();
    let samples = relay_rx
        .iter()
        .map(|&y| k * y + complex_gaussian(noise.variance(), rng))
        .collect();
    Observation {
        samples,
        kind: ObservationKind::Relayed,
    }
}

/// `y = sqrt(P) h_sr_a h_rd g x_A + sqrt(P) h_sr_b h_rd g x_B + h_rd g n_R + n_D`.
#[allow(clippy::too_many_arguments)]
pub fn compose_relayed<R: Rng + ?Sized>(
    x_a: &SymbolStream,
    x_b: &SymbolStream,
    h_sr_a: ComplexGain,
    h_sr_b: ComplexGain,
    h_rd: ComplexGain,
    g: RelayGain,
    tx_power: f64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Observation, PhyError> {
    let at_relay = relay_receive(x_a, x_b, h_sr_a, h_sr_b, tx_power, noise, rng)?;
    Ok(forward(&at_relay, h_rd, g, noise, rng))
}

/// Effective channel parameters seen by the joint detector.
///
/// The gains exclude `sqrt(P)`; the relayed ones already include the relay
/// gain, i.e. `h2 h4 g` and `h4 h7 g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointParams {
    pub tx_power: f64,
    pub dir_a: ComplexGain,
    pub dir_b: ComplexGain,
    pub rel_a: ComplexGain,
    pub rel_b: ComplexGain,
    /// Weight on the direct branch distance.
    pub w_dir: f64,
    /// Weight on the relayed branch distance.
    pub w_rel: f64,
    pub source_a: NodeId,
    pub source_b: NodeId,
}

impl JointParams {
    /// Unweighted metric, the sum of the two squared distances.
    pub fn new(
        tx_power: f64,
        dir_a: ComplexGain,
        dir_b: ComplexGain,
        rel_a: ComplexGain,
        rel_b: ComplexGain,
    ) -> Self {
        JointParams {
            tx_power,
            dir_a,
            dir_b,
            rel_a,
            rel_b,
            w_dir: 1.0,
            w_rel: 1.0,
            source_a: 0,
            source_b: 1,
        }
    }

    /// Weights each branch by its inverse noise variance; the relayed branch
    /// carries `sigma^2 (1 + gamma_rd g^2)`.
    pub fn noise_weighted(mut self, noise_var: f64, h_rd: ComplexGain, g: RelayGain) -> Self {
        self.w_dir = 1.0 / noise_var;
        self.w_rel = 1.0 / (noise_var * (1.0 + gain_power(h_rd) * g.value() * g.value()));
        self
    }

    pub fn with_sources(mut self, a: NodeId, b: NodeId) -> Self {
        self.source_a = a;
        self.source_b = b;
        self
    }
}

/// Output of [`ml_joint_detect`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointDecision {
    pub a: SymbolStream,
    pub b: SymbolStream,
    /// False when stream A has no energy in either observation.
    pub a_detectable: bool,
    pub b_detectable: bool,
}

fn is_zero(h: ComplexGain) -> bool {
    h.re == 0.0 && h.im == 0.0
}

/// Joint ML detection of two aligned streams from a direct and a relayed
/// observation.
///
/// For every symbol index the pair `(x_A, x_B)` minimising
/// `w_dir |y_dir - sqrt(P)(h_a x_A + h_b x_B)|^2 + w_rel |y_rel - ...|^2` is
/// chosen by exhaustive search. Pairs are visited in `(a, b)` lexicographic
/// order and only a strictly smaller metric replaces the incumbent, so ties
/// resolve to the lowest dictionary indices.
pub fn ml_joint_detect(
    y_dir: &Observation,
    y_rel: &Observation,
    params: &JointParams,
    dict_a: &Constellation,
    dict_b: &Constellation,
) -> Result<JointDecision, PhyError> {
    if y_dir.samples.len() != y_rel.samples.len() {
        return Err(PhyError::LengthMismatch(
            y_dir.samples.len(),
            y_rel.samples.len(),
        ));
    }
    let a_detectable = !(is_zero(params.dir_a) || params.w_dir == 0.0)
        || !(is_zero(params.rel_a) || params.w_rel == 0.0);
    let b_detectable = !(is_zero(params.dir_b) || params.w_dir == 0.0)
        || !(is_zero(params.rel_b) || params.w_rel == 0.0);
    if !a_detectable && !b_detectable {
        return Err(PhyError::DegenerateGeometry);
    }

    let sp = params.tx_power.sqrt();
    let (na, nb) = (dict_a.len(), dict_b.len());
    let mut cand_dir = Vec::with_capacity(na * nb);
    let mut cand_rel = Vec::with_capacity(na * nb);
    for &xa in dict_a.points() {
        for &xb in dict_b.points() {
            cand_dir.push(sp * (params.dir_a * xa + params.dir_b * xb));
            cand_rel.push(sp * (params.rel_a * xa + params.rel_b * xb));
        }
    }

    let n = y_dir.samples.len();
    let mut out_a = Vec::with_capacity(n);
    let mut out_b = Vec::with_capacity(n);
    for (&yd, &yr) in y_dir.samples.iter().zip(&y_rel.samples) {
        let mut best = 0;
        let mut best_m = f64::INFINITY;
        for (k, (cd, cr)) in cand_dir.iter().zip(&cand_rel).enumerate() {
            let m = params.w_dir * (yd - cd).norm_sqr() + params.w_rel * (yr - cr).norm_sqr();
            if m < best_m {
                best_m = m;
                best = k;
            }
        }
        out_a.push(dict_a.points()[best / nb]);
        out_b.push(dict_b.points()[best % nb]);
    }
    Ok(JointDecision {
        a: SymbolStream {
            symbols: out_a,
            source: params.source_a,
        },
        b: SymbolStream {
            symbols: out_b,
            source: params.source_b,
        },
        a_detectable,
        b_detectable,
    })
}

/// Single-stream ML over one or two branches (direct, or direct plus relayed
/// copy as in orthogonal AF cooperation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombiningParams {
    pub tx_power: f64,
    pub dir: ComplexGain,
    pub rel: ComplexGain,
    pub w_dir: f64,
    pub w_rel: f64,
}

pub fn ml_combined_detect(
    y_dir: &Observation,
    y_rel: Option<&Observation>,
    params: &CombiningParams,
    dict: &Constellation,
    source: NodeId,
) -> Result<SymbolStream, PhyError> {
    if let Some(r) = y_rel {
        if r.samples.len() != y_dir.samples.len() {
            return Err(PhyError::LengthMismatch(
                y_dir.samples.len(),
                r.samples.len(),
            ));
        }
    }
    let rel_used = y_rel.is_some() && !is_zero(params.rel) && params.w_rel > 0.0;
    if is_zero(params.dir) && !rel_used {
        return Err(PhyError::DegenerateGeometry);
    }
    let sp = params.tx_power.sqrt();
    let cand_dir: Vec<Complex64> = dict.points().iter().map(|&x| sp * params.dir * x).collect();
    let cand_rel: Vec<Complex64> = dict.points().iter().map(|&x| sp * params.rel * x).collect();
    let symbols = y_dir
        .samples
        .iter()
        .enumerate()
        .map(|(i, &yd)| {
            let mut best = 0;
            let mut best_m = f64::INFINITY;
            for k in 0..dict.len() {
                let mut m = params.w_dir * (yd - cand_dir[k]).norm_sqr();
                if let Some(r) = y_rel {
                    m += params.w_rel * (r.samples[i] - cand_rel[k]).norm_sqr();
                }
                if m < best_m {
                    best_m = m;
                    best = k;
                }
            }
            dict.points()[best]
        })
        .collect();
    Ok(SymbolStream { symbols, source })
}

/// Per-packet success: a packet survives only if every symbol matches.
pub fn frame_success(
    detected: (&SymbolStream, &SymbolStream),
    truth: (&SymbolStream, &SymbolStream),
) -> Result<(bool, bool), PhyError> {
    check_len(detected.0, truth.0)?;
    check_len(detected.1, truth.1)?;
    Ok((
        detected.0.symbols == truth.0.symbols,
        detected.1.symbols == truth.1.symbols,
    ))
}

/// Number of symbol positions where the two streams differ.
pub fn symbol_errors(detected: &SymbolStream, truth: &SymbolStream) -> usize {
    detected
        .symbols
        .iter()
        .zip(&truth.symbols)
        .filter(|(a, b)| a != b)
        .count()
}
