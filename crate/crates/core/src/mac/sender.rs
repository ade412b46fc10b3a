//! Sender-side timing after the CTS: busy-tone listening, waiting for a
//! CTC, and the direct fallback.

use super::frame::TxMode;
use super::TimingNs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderPlan {
    /// Send DATA directly at `data_start`.
    Direct { data_start: u64 },
    /// A relay announced itself; wait for its CTC until `deadline`.
    AwaitCtc {
        expect: TxMode,
        window_start: u64,
        deadline: u64,
    },
}

/// Start of the relay contention window: two busy-tone slots after SIFS.
pub fn relay_window_start(cts_end: u64, t: &TimingNs) -> u64 {
    cts_end + t.sifs + 2 * t.slot
}

/// Busy-tone slot start times `(slot 1, slot 2)`.
pub fn tone_slots(cts_end: u64, t: &TimingNs) -> (u64, u64) {
    (cts_end + t.sifs, cts_end + t.sifs + t.slot)
}

/// Decision taken by the sender once both busy-tone slots have passed.
/// Without any cooperative mode the sender behaves as plain DCF.
pub fn sender_after_cts(
    cts_end: u64,
    tone1: bool,
    tone2: bool,
    t: &TimingNs,
    cooperative: bool,
    legacy_extra_slot: bool,
    n_max: u32,
) -> SenderPlan {
    if !cooperative {
        return SenderPlan::Direct {
            data_start: cts_end + t.sifs,
        };
    }
    let w0 = relay_window_start(cts_end, t);
    if !(tone1 || tone2) {
        let extra = if legacy_extra_slot { t.slot } else { 0 };
        return SenderPlan::Direct {
            data_start: w0 + extra,
        };
    }
    SenderPlan::AwaitCtc {
        expect: if tone1 { TxMode::Ancol } else { TxMode::Coop },
        window_start: w0,
        deadline: ctc_deadline(w0, t, n_max),
    }
}

/// Last instant a CTC can end; the sender falls back to direct here.
pub fn ctc_deadline(window_start: u64, t: &TimingNs, n_max: u32) -> u64 {
    window_start + n_max as u64 * t.slot + t.ctc
}

/// DATA follows a received CTC after SIFS.
pub fn data_start_after_ctc(ctc_end: u64, t: &TimingNs) -> u64 {
    ctc_end + t.sifs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> TimingNs {
        TimingNs {
            sifs: 16_000,
            difs: 34_000,
            slot: 9_000,
            rts: 52_000,
            cts: 44_000,
            ctc: 47_000,
            ack: 44_000,
            data: 120_000,
        }
    }

    #[test]
    fn no_tones_means_direct_after_two_slots() {
        let p = sender_after_cts(1_000_000, false, false, &t(), true, false, 10);
        assert_eq!(
            p,
            SenderPlan::Direct {
                data_start: 1_000_000 + 16_000 + 18_000
            }
        );
        let p = sender_after_cts(1_000_000, false, false, &t(), true, true, 10);
        assert_eq!(
            p,
            SenderPlan::Direct {
                data_start: 1_000_000 + 16_000 + 27_000
            }
        );
    }

    #[test]
    fn plain_dcf_sends_after_sifs() {
        let p = sender_after_cts(500, true, true, &t(), false, false, 10);
        assert_eq!(p, SenderPlan::Direct { data_start: 16_500 });
    }

    #[test]
    fn tones_select_expected_mode() {
        match sender_after_cts(0, true, false, &t(), true, false, 10) {
            SenderPlan::AwaitCtc {
                expect,
                window_start,
                deadline,
            } => {
                assert_eq!(expect, TxMode::Ancol);
                assert_eq!(window_start, 34_000);
                assert_eq!(deadline, 34_000 + 90_000 + 47_000);
            }
            p => panic!("{p:?}"),
        }
        assert!(matches!(
            sender_after_cts(0, false, true, &t(), true, false, 10),
            SenderPlan::AwaitCtc {
                expect: TxMode::Coop,
                ..
            }
        ));
    }

    #[test]
    fn ctc_after_five_slots() {
        let w0 = relay_window_start(0, &t());
        let ctc_end = w0 + 5 * 9_000 + 47_000;
        assert_eq!(data_start_after_ctc(ctc_end, &t()), ctc_end + 16_000);
    }
}
