//! Estimated rates of the direct, cooperative (two-slot AF) and overlapped
//! analog-network-coded transmission modes, the mode-selection inequalities
//! and the relay-contention timing derived from them.

use crate::channel::{gain_power, ComplexGain, NodeId};
use crate::phy::RelayGain;

/// Which expression is used for the second branch of the COOP rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoopRateForm {
    /// Direct SNR multiplied by the relayed SNR.
    #[default]
    Product,
    /// Maximal-ratio AF form: direct SNR plus relayed SNR.
    Mrc,
}

/// One row of a relay's `rate_estimates` table.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimateRow {
    pub pair1: (NodeId, NodeId),
    pub pair2: Option<(NodeId, NodeId)>,
    pub relay: Option<NodeId>,
    pub r_dir: f64,
    pub r_coop: Option<f64>,
    pub r_ancol: Option<f64>,
}

/// Control-plane durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadProfile {
    pub t_rts: f64,
    pub t_cts: f64,
    pub t_ctc: f64,
    pub t_sifs: f64,
    pub t_slot: f64,
    pub t_rbkf: f64,
}

/// Direct-mode rate `W log2(1 + P gamma1 / sigma^2)`.
pub fn r_dir(bandwidth: f64, tx_power: f64, gamma1: f64, noise_var: f64) -> f64 {
    bandwidth * (1.0 + tx_power * gamma1 / noise_var).log2()
}

/// Two-slot amplify-and-forward rate.
#[allow(clippy::too_many_arguments)]
pub fn r_coop(
    bandwidth: f64,
    tx_power: f64,
    gamma1: f64,
    gamma2: f64,
    gamma4: f64,
    g: RelayGain,
    noise_var: f64,
    form: CoopRateForm,
) -> f64 {
    let g2 = g.value() * g.value();
    let snr_dir = tx_power * gamma1 / noise_var;
    let snr_sr = tx_power * gamma2 / noise_var;
    let snr_relayed = tx_power * gamma2 * gamma4 * g2 / (noise_var * (1.0 + gamma4 * g2));
    let combined = match form {
        CoopRateForm::Product => snr_dir * snr_relayed,
        CoopRateForm::Mrc => snr_dir + snr_relayed,
    };
    let first = (1.0 + snr_sr).log2();
    let second = (1.0 + combined).log2();
    (bandwidth / 2.0) * first.min(second).max(0.0)
}

/// Gains entering the overlapped-transmission sum rate at the first receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncolGains {
    pub h1: ComplexGain,
    pub h2: ComplexGain,
    pub h4: ComplexGain,
    pub h7: ComplexGain,
    pub h8: ComplexGain,
}

/// Sum rate of the overlapped mode at one receiver.
///
/// The log argument is clamped at 1 so that noisy estimates can never yield
/// a negative rate.
pub fn r_ancol(bandwidth: f64, tx_power: f64, h: &AncolGains, g: RelayGain, noise_var: f64) -> f64 {
    let (g1, g2, g4, g7, g8) = (
        gain_power(h.h1),
        gain_power(h.h2),
        gain_power(h.h4),
        gain_power(h.h7),
        gain_power(h.h8),
    );
    let g2_ = g.value() * g.value();
    let p = tx_power;
    let s2 = noise_var;
    let s4 = noise_var * noise_var;
    let den = 1.0 + g4 * g2_;
    let cross = (h.h1 * h.h2.conj() * h.h7 * h.h8.conj()).re;
    let arg = 1.0
        + p * g1 / s2
        + p * g8 / s2
        + p * g2 * g4 * g2_ / (s2 * den)
        + p * g4 * g7 * g2_ / (s2 * den)
        + p * p * g1 * g4 * g7 * g2_ / (s4 * den)
        + p * p * g2 * g4 * g8 * g2_ / (s4 * den)
        - p * p * g4 * cross * g2_ / (s4 * den);
    bandwidth * arg.max(1.0).log2()
}

fn airtime(bits: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}

/// True when the cooperative exchange, overhead included, is shorter than
/// the direct one.
pub fn coop_beneficial(bits: f64, r_coop: f64, r_dir: f64, ovhd_coop: f64) -> bool {
    airtime(bits, r_coop) + ovhd_coop < airtime(bits, r_dir)
}

/// True when the overlapped exchange beats the cooperative one.
pub fn ancol_beneficial(
    bits: f64,
    r_ancol: f64,
    r_coop: f64,
    ovhd_ancol: f64,
    ovhd_coop: f64,
) -> bool {
    airtime(bits, r_ancol) + ovhd_ancol < airtime(bits, r_coop) + ovhd_coop
}

/// `T_RTS + 2 T_CTS + 3 T_SIFS + 2 T_s + T_RBKF`; the CTC is billed as a CTS.
pub fn protocol_overhead(p: &OverheadProfile) -> f64 {
    p.t_rts + 2.0 * p.t_cts + 3.0 * p.t_sifs + 2.0 * p.t_slot + p.t_rbkf
}

/// Relay contention backoff in slots: `2N - floor(r_norm * N)`.
///
/// `r_norm` is clamped into `[1, 2]`, so the result lies in `[0, N]`.
pub fn relay_backoff_slots(r_norm: f64, n_max: u32) -> u32 {
    let r = if (1.0..=2.0).contains(&r_norm) {
        r_norm
    } else {
        log::warn!("normalised rate gain {r_norm} outside [1, 2], clamping");
        if r_norm.is_nan() {
            1.0
        } else {
            r_norm.clamp(1.0, 2.0)
        }
    };
    let n = n_max as f64;
    // Guard against 1.5 * 10 = 14.999... style rounding.
    let scaled = (r * n * (1.0 + 4.0 * f64::EPSILON)).floor();
    (2.0 * n - scaled).max(0.0) as u32
}

/// Rate gain of a mode over direct transmission, in packets delivered per
/// direct-packet airtime, clamped to `[1, 2]`.
///
/// `chosen_rate` is the per-cycle rate of the mode: for the overlapped mode
/// the sum rate, so two packets in the airtime of one direct packet map to 2.
pub fn normalize_rate_gain(chosen_rate: f64, baseline_rate: f64) -> f64 {
    if !(baseline_rate > 0.0) {
        return 1.0;
    }
    (chosen_rate / baseline_rate).clamp(1.0, 2.0)
}

/// Alternative rate-gain mapping based on per-packet airtime:
/// `1 + clamp(1 - T_mode / T_direct, 0, 1)` with `T = L / rate`.
///
/// For the overlapped mode the sum rate is already the per-packet rate
/// (two packets in `2L / r_sum`), so it is passed unchanged.
pub fn normalize_rate_gain_airtime(per_packet_rate: f64, baseline_rate: f64) -> f64 {
    if !(baseline_rate > 0.0) || !(per_packet_rate > 0.0) {
        return 1.0;
    }
    1.0 + (1.0 - baseline_rate / per_packet_rate).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const W: f64 = 20e6;

    #[test]
    fn direct_rate_values() {
        assert_eq!(r_dir(W, 1.0, 0.0, 1e-9), 0.0);
        assert!((r_dir(W, 1e-9, 1.0, 1e-9) - 20e6).abs() < 1e-6);
        assert!((r_dir(W, 15e-9, 1.0, 1e-9) - 80e6).abs() < 1e-6);
    }

    #[test]
    fn coop_rate_degenerate_cases() {
        let g = RelayGain::new(0.7);
        assert_eq!(
            r_coop(W, 1.0, 0.3, 0.0, 0.5, g, 1.0, CoopRateForm::Product),
            0.0
        );
        assert_eq!(
            r_coop(
                W,
                1.0,
                0.3,
                0.8,
                0.5,
                RelayGain::new(0.0),
                1.0,
                CoopRateForm::Product
            ),
            0.0
        );
    }

    #[test]
    fn coop_rate_matches_hand_evaluation() {
        let (p, s) = (2.0, 0.5);
        let (g1, g2, g4, gv) = (0.3, 1.2, 0.9, 0.6);
        let g = RelayGain::new(gv);
        let relayed = p * g2 * g4 * gv * gv / (s * (1.0 + g4 * gv * gv));
        let a = (1.0 + p * g2 / s).log2();
        let b = (1.0 + (p * g1 / s) * relayed).log2();
        let want = W / 2.0 * a.min(b);
        let got = r_coop(W, p, g1, g2, g4, g, s, CoopRateForm::Product);
        assert!((got - want).abs() / want < 1e-12);
        let b_mrc = (1.0 + p * g1 / s + relayed).log2();
        let got = r_coop(W, p, g1, g2, g4, g, s, CoopRateForm::Mrc);
        assert!((got - W / 2.0 * a.min(b_mrc)).abs() < 1e-6);
    }

    fn gains() -> AncolGains {
        AncolGains {
            h1: Complex64::new(0.4, -0.2),
            h2: Complex64::new(1.1, 0.3),
            h4: Complex64::new(-0.5, 0.9),
            h7: Complex64::new(0.2, 0.8),
            h8: Complex64::new(-0.6, -0.1),
        }
    }

    #[test]
    fn ancol_rate_term_by_term() {
        let h = gains();
        let (p, s, gv) = (1.5, 0.25, 0.45);
        let n2 = |z: Complex64| z.re * z.re + z.im * z.im;
        let (a1, a2, a4, a7, a8) = (n2(h.h1), n2(h.h2), n2(h.h4), n2(h.h7), n2(h.h8));
        let g2 = gv * gv;
        let d = 1.0 + a4 * g2;
        // Re(h1 h2* h7 h8*) expanded by hand.
        let z1 = Complex64::new(
            h.h1.re * h.h2.re + h.h1.im * h.h2.im,
            h.h1.im * h.h2.re - h.h1.re * h.h2.im,
        );
        let z2 = Complex64::new(
            h.h7.re * h.h8.re + h.h7.im * h.h8.im,
            h.h7.im * h.h8.re - h.h7.re * h.h8.im,
        );
        let cross = z1.re * z2.re - z1.im * z2.im;
        let terms = [
            1.0,
            p * a1 / s,
            p * a8 / s,
            p * a2 * a4 * g2 / (s * d),
            p * a4 * a7 * g2 / (s * d),
            p * p * a1 * a4 * a7 * g2 / (s * s * d),
            p * p * a2 * a4 * a8 * g2 / (s * s * d),
            -p * p * a4 * cross * g2 / (s * s * d),
        ];
        let want = W * terms.iter().sum::<f64>().log2();
        let got = r_ancol(W, p, &h, RelayGain::new(gv), s);
        assert!((got - want).abs() / want < 1e-12, "{got} {want}");
    }

    #[test]
    fn ancol_rate_degenerations() {
        let zero = Complex64::new(0.0, 0.0);
        let all_zero = AncolGains {
            h1: zero,
            h2: zero,
            h4: zero,
            h7: zero,
            h8: zero,
        };
        assert_eq!(r_ancol(W, 1.0, &all_zero, RelayGain::new(1.0), 1.0), 0.0);
        let h = gains();
        let (p, s) = (1.5, 0.25);
        let want = W * (1.0 + p * h.h1.norm_sqr() / s + p * h.h8.norm_sqr() / s).log2();
        let got = r_ancol(W, p, &h, RelayGain::new(0.0), s);
        assert!((got - want).abs() / want < 1e-12);
    }

    #[test]
    fn beneficial_inequalities() {
        assert!(!coop_beneficial(4000.0, 20e6, 20e6, 1e-6));
        assert!(coop_beneficial(4000.0, 40e6, 20e6, 0.0));
        assert!(coop_beneficial(4000.0, 30e6, 20e6, 50e-6));
        assert!(!coop_beneficial(4000.0, 0.0, 20e6, 0.0));
        assert!(coop_beneficial(4000.0, 1e6, 0.0, 0.0));
        assert!(!ancol_beneficial(4000.0, 20e6, 20e6, 1e-4, 1e-4));
        assert!(ancol_beneficial(4000.0, 40e6, 20e6, 1e-4, 1e-4));
        // 4000/25e6 + 1.2e-4 = 2.8e-4 vs 4000/20e6 + 1e-4 = 3.0e-4
        assert!(ancol_beneficial(4000.0, 25e6, 20e6, 1.2e-4, 1e-4));
        assert!(!ancol_beneficial(4000.0, 25e6, 20e6, 1.5e-4, 1e-4));
    }

    #[test]
    fn overhead_sum() {
        let zero = OverheadProfile {
            t_rts: 0.0,
            t_cts: 0.0,
            t_ctc: 0.0,
            t_sifs: 0.0,
            t_slot: 0.0,
            t_rbkf: 0.0,
        };
        assert_eq!(protocol_overhead(&zero), 0.0);
        let p = OverheadProfile {
            t_rts: 52e-6,
            t_cts: 44e-6,
            t_ctc: 47e-6,
            t_sifs: 16e-6,
            t_slot: 9e-6,
            t_rbkf: 45e-6,
        };
        assert!((protocol_overhead(&p) - 251e-6).abs() < 1e-15);
        let base = protocol_overhead(&OverheadProfile { t_rbkf: 0.0, ..p });
        assert!((protocol_overhead(&p) - base - 45e-6).abs() < 1e-15);
    }

    #[test]
    fn backoff_slot_values() {
        assert_eq!(relay_backoff_slots(2.0, 10), 0);
        assert_eq!(relay_backoff_slots(1.0, 10), 10);
        assert_eq!(relay_backoff_slots(1.5, 10), 5);
        assert_eq!(relay_backoff_slots(1.9, 10), 1);
        assert_eq!(relay_backoff_slots(1.2, 10), 8);
        assert_eq!(relay_backoff_slots(7.0, 10), 0);
        assert_eq!(relay_backoff_slots(0.2, 10), 10);
    }

    #[test]
    fn normalised_gain() {
        assert_eq!(normalize_rate_gain(40e6, 20e6), 2.0);
        assert_eq!(normalize_rate_gain(20e6, 20e6), 1.0);
        assert_eq!(normalize_rate_gain(10e6, 20e6), 1.0);
        assert!((normalize_rate_gain(26e6, 20e6) - 1.3).abs() < 1e-12);
        assert_eq!(normalize_rate_gain(5e6, 0.0), 1.0);
        assert_eq!(normalize_rate_gain_airtime(20e6, 20e6), 1.0);
        assert_eq!(normalize_rate_gain_airtime(10e6, 20e6), 1.0);
        assert!((normalize_rate_gain_airtime(40e6, 20e6) - 1.5).abs() < 1e-12);
        assert_eq!(normalize_rate_gain_airtime(5e6, 0.0), 1.0);
    }
}
