//! Simulator configuration. Defaults follow the published evaluation setup
//! where one exists and common 802.11 OFDM values otherwise.

use std::fmt;

use crate::channel::NodeId;
use crate::error::ConfigError;
use crate::phy::Modulation;
use crate::rate::CoopRateForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Plain 802.11 DCF with RTS/CTS.
    Dot11,
    /// Two-slot amplify-and-forward cooperation only.
    CoopMac,
    /// Cooperation plus overlapped analog network coding.
    CancMac,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Dot11, Protocol::CoopMac, Protocol::CancMac];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Dot11 => "DOT11",
            Protocol::CoopMac => "COOP_MAC",
            Protocol::CancMac => "CANC_MAC",
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "DOT11" | "802.11" | "80211" => Some(Protocol::Dot11),
            "COOP_MAC" | "COOP" => Some(Protocol::CoopMac),
            "CANC_MAC" | "CANC" => Some(Protocol::CancMac),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Every sender keeps the same destination for the whole run.
    FixedPairs,
    /// Destinations rotate after a fixed number of delivered packets.
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub rotation_period: u64,
}

impl Scenario {
    pub fn s1() -> Self {
        Scenario {
            kind: ScenarioKind::FixedPairs,
            rotation_period: 0,
        }
    }

    pub fn s2(rotation_period: u64) -> Self {
        Scenario {
            kind: ScenarioKind::Rotating,
            rotation_period,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self.kind {
            ScenarioKind::FixedPairs => "s1",
            ScenarioKind::Rotating => "s2",
        }
    }
}

/// How DATA outcomes are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhyFidelity {
    /// Modulate, pass through the channel, detect.
    Symbol,
    /// Compare the payload rate with the instantaneous achievable rate.
    Rate,
}

impl PhyFidelity {
    pub fn as_str(self) -> &'static str {
        match self {
            PhyFidelity::Symbol => "symbol",
            PhyFidelity::Rate => "rate",
        }
    }
}

/// Relay-side rule for choosing a cooperative mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeRule {
    /// Raw estimated rates: COOP if `R_coop > R_dir`, ANCOL if also `R_anc > R_coop`.
    RateComparison,
    /// Payload airtime plus control overhead must shrink.
    Overhead,
}

impl ModeRule {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeRule::RateComparison => "rate",
            ModeRule::Overhead => "overhead",
        }
    }
}

/// Mapping from estimated rates to the normalised gain that drives the relay
/// contention backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateGainMap {
    /// `clamp(R_mode / R_dir, 1, 2)`.
    Ratio,
    /// `1 + clamp(1 - R_dir / R_mode, 0, 1)`.
    Airtime,
}

impl RateGainMap {
    pub fn as_str(self) -> &'static str {
        match self {
            RateGainMap::Ratio => "ratio",
            RateGainMap::Airtime => "airtime",
        }
    }
}

/// Lifetime of channel estimates kept across exchanges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StalenessModel {
    /// Estimates are kept until overwritten.
    Frozen,
    /// Estimates older than `max_age` seconds are ignored.
    Decay { max_age: f64 },
}

/// Durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacTiming {
    pub sifs: f64,
    pub difs: f64,
    pub slot: f64,
    pub rts: f64,
    pub cts: f64,
    pub ctc: f64,
    pub ack: f64,
    /// PHY preamble in front of every DATA frame.
    pub preamble: f64,
}

impl Default for MacTiming {
    fn default() -> Self {
        MacTiming {
            sifs: 16e-6,
            difs: 34e-6,
            slot: 9e-6,
            rts: 52e-6,
            cts: 44e-6,
            ctc: 47e-6,
            ack: 44e-6,
            preamble: 20e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub protocol: Protocol,
    /// Turn off the cooperative modes individually. With both off every
    /// protocol behaves as plain DCF.
    pub disable_coop: bool,
    pub disable_ancol: bool,
    pub n_nodes: usize,
    /// Number of backlogged senders, counted from node 0. `None` means all.
    pub active_senders: Option<usize>,
    pub cell_radius: f64,
    pub path_loss_exp: f64,
    pub avg_snr_db: f64,
    pub tx_power: f64,
    pub noise_var: f64,
    pub bandwidth: f64,
    pub packet_bits: u32,
    pub modulation: Modulation,
    pub scenario: Scenario,
    pub seed: u64,
    /// Stop once this many packets are delivered or dropped.
    pub n_packets: u64,
    pub fidelity: PhyFidelity,
    pub timing: MacTiming,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub n_relay_slots: u32,
    pub anfl_capacity: usize,
    pub n_pilots: u32,
    pub reciprocal: bool,
    pub coop_rate_form: CoopRateForm,
    pub mode_rule: ModeRule,
    pub rate_gain_map: RateGainMap,
    pub staleness: StalenessModel,
    /// A node counts as backlogged if its last RTS was heard this recently.
    pub backlog_window: f64,
    /// Delay direct DATA by one more slot after the busy-tone window.
    pub legacy_extra_slot: bool,
    /// Weight the relayed branch by its noise power in the detectors.
    pub noise_weighted_detection: bool,
    /// SNR gap applied to achievable rates in rate fidelity.
    pub rate_snr_gap_db: f64,
    /// `(time in seconds, node)` disassociation events.
    pub disassociations: Vec<(f64, NodeId)>,
    pub record_trace: bool,
    /// Hard cap on dispatched events.
    pub max_events: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            protocol: Protocol::CancMac,
            disable_coop: false,
            disable_ancol: false,
            n_nodes: 8,
            active_senders: None,
            cell_radius: 100.0,
            path_loss_exp: 3.0,
            avg_snr_db: 20.0,
            tx_power: 0.1,
            noise_var: 1e-9,
            bandwidth: 20e6,
            packet_bits: 4000,
            modulation: Modulation::Qpsk,
            scenario: Scenario::s1(),
            seed: 1,
            n_packets: 10_000,
            fidelity: PhyFidelity::Symbol,
            timing: MacTiming::default(),
            cw_min: 16,
            cw_max: 1024,
            retry_limit: 7,
            n_relay_slots: 10,
            anfl_capacity: 20,
            n_pilots: 8,
            reciprocal: true,
            coop_rate_form: CoopRateForm::Product,
            mode_rule: ModeRule::RateComparison,
            rate_gain_map: RateGainMap::Airtime,
            staleness: StalenessModel::Frozen,
            backlog_window: 0.05,
            legacy_extra_slot: false,
            noise_weighted_detection: true,
            rate_snr_gap_db: 0.0,
            disassociations: Vec::new(),
            record_trace: true,
            max_events: 200_000_000,
        }
    }
}

fn out_of_range(
    key: &'static str,
    value: impl fmt::Display,
    expected: &'static str,
) -> ConfigError {
    ConfigError::OutOfRange {
        key,
        value: value.to_string(),
        expected,
    }
}

impl SimConfig {
    pub fn coop_enabled(&self) -> bool {
        !self.disable_coop && matches!(self.protocol, Protocol::CoopMac | Protocol::CancMac)
    }

    pub fn ancol_enabled(&self) -> bool {
        !self.disable_ancol && self.protocol == Protocol::CancMac
    }

    /// Busy-tone slots and relay contention are only used when some
    /// cooperative mode can be proposed.
    pub fn cooperative(&self) -> bool {
        self.coop_enabled() || self.ancol_enabled()
    }

    pub fn senders(&self) -> usize {
        self.active_senders
            .unwrap_or(self.n_nodes)
            .min(self.n_nodes)
    }

    /// Average SNR at the cell-edge reference distance, linear.
    pub fn avg_snr_linear(&self) -> f64 {
        10f64.powf(self.avg_snr_db / 10.0)
    }

    /// DATA airtime: preamble plus one symbol period per modulation symbol.
    pub fn data_airtime(&self) -> f64 {
        let b = self.modulation.bits_per_symbol() as u32;
        let symbols = self.packet_bits.div_ceil(b);
        self.timing.preamble + symbols as f64 / self.bandwidth
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_nodes < 2 {
            return Err(out_of_range("n_nodes", self.n_nodes, ">= 2"));
        }
        if let Some(k) = self.active_senders {
            if k == 0 || k > self.n_nodes {
                return Err(out_of_range("active_senders", k, "1..=n_nodes"));
            }
        }
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return Err(out_of_range("cell_radius", self.cell_radius, "> 0"));
        }
        if !(self.path_loss_exp >= 0.0 && self.path_loss_exp.is_finite()) {
            return Err(out_of_range("path_loss_exp", self.path_loss_exp, ">= 0"));
        }
        if !self.avg_snr_db.is_finite() {
            return Err(out_of_range("avg_snr_db", self.avg_snr_db, "finite"));
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return Err(out_of_range("tx_power", self.tx_power, "> 0"));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(out_of_range("noise_var", self.noise_var, "> 0"));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(out_of_range("bandwidth", self.bandwidth, "> 0"));
        }
        let b = self.modulation.bits_per_symbol() as u32;
        if self.packet_bits == 0 || !self.packet_bits.is_multiple_of(b) {
            return Err(out_of_range(
                "packet_bits",
                self.packet_bits,
                "positive multiple of bits per symbol",
            ));
        }
        if self.scenario.kind == ScenarioKind::Rotating && self.scenario.rotation_period == 0 {
            return Err(out_of_range("rotation_period", 0, "> 0 for scenario s2"));
        }
        if self.n_packets == 0 {
            return Err(out_of_range("n_packets", 0, ">= 1"));
        }
        let t = &self.timing;
        for (key, v) in [
            ("sifs", t.sifs),
            ("difs", t.difs),
            ("slot", t.slot),
            ("rts", t.rts),
            ("cts", t.cts),
            ("ctc", t.ctc),
            ("ack", t.ack),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(out_of_range(key, v, "0 < t < 1 s"));
            }
        }
        if !(t.preamble >= 0.0 && t.preamble < 1.0) {
            return Err(out_of_range("preamble", t.preamble, "0 <= t < 1 s"));
        }
        if self.cw_min == 0 {
            return Err(out_of_range("cw_min", 0, ">= 1"));
        }
        if self.cw_max < self.cw_min {
            return Err(out_of_range("cw_max", self.cw_max, ">= cw_min"));
        }
        if self.n_relay_slots == 0 {
            return Err(out_of_range("n_relay_slots", 0, ">= 1"));
        }
        if self.n_pilots == 0 {
            return Err(out_of_range("n_pilots", 0, ">= 1"));
        }
        if let StalenessModel::Decay { max_age } = self.staleness {
            if !(max_age > 0.0) {
                return Err(out_of_range("estimate_max_age", max_age, "> 0"));
            }
        }
        if !(self.backlog_window >= 0.0 && self.backlog_window.is_finite()) {
            return Err(out_of_range("backlog_window", self.backlog_window, ">= 0"));
        }
        if !(self.rate_snr_gap_db >= 0.0 && self.rate_snr_gap_db.is_finite()) {
            return Err(out_of_range(
                "rate_snr_gap_db",
                self.rate_snr_gap_db,
                ">= 0",
            ));
        }
        for &(t, node) in &self.disassociations {
            if node >= self.n_nodes {
                return Err(out_of_range("disassociate", node, "node id < n_nodes"));
            }
            if !(t >= 0.0 && t.is_finite()) {
                return Err(out_of_range("disassociate", t, "time >= 0"));
            }
        }
        if self.max_events == 0 {
            return Err(out_of_range("max_events", 0, ">= 1"));
        }
        Ok(())
    }
}
