//! Experiment configuration: defaults, then a flat `key=value` file, then
//! command-line flags.

use std::fmt::Write as _;
use std::str::FromStr;

use cancsim_core::{
    CoopRateForm, ModeRule, Modulation, PhyFidelity, Protocol, RateGainMap, Scenario, ScenarioKind,
    SimConfig, StalenessModel,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { text: String, line: usize },
    #[error("{key}: invalid value `{value}` ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("only one axis may take several values (got {0} and {1})")]
    MultipleAxes(&'static str, &'static str),
    #[error(transparent)]
    Config(#[from] cancsim_core::ConfigError),
    #[error("run failed for {config}: {source}")]
    Run {
        config: String,
        source: cancsim_core::ConfigError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Nodes,
    Snr,
    PacketBits,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Nodes, Axis::Snr, Axis::PacketBits];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Nodes => "nodes",
            Axis::Snr => "snr",
            Axis::PacketBits => "packet_bits",
        }
    }

    pub fn apply(self, c: &mut SimConfig, v: f64) {
        match self {
            Axis::Nodes => c.n_nodes = v as usize,
            Axis::Snr => c.avg_snr_db = v,
            Axis::PacketBits => c.packet_bits = v as u32,
        }
    }
}

/// A base simulator configuration plus the sweep around it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: SimConfig,
    pub protocols: Vec<Protocol>,
    pub seeds: Vec<u64>,
    pub nodes: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub packet_bits: Vec<u32>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let base = SimConfig::default();
        ExperimentConfig {
            protocols: Protocol::ALL.to_vec(),
            seeds: (1..=10).collect(),
            nodes: vec![base.n_nodes],
            snr_db: vec![base.avg_snr_db],
            packet_bits: vec![base.packet_bits],
            base,
        }
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> CliError {
    CliError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e: T::Err| bad(key, v, e.to_string()))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let out: Vec<T> = v
        .split(',')
        .map(|x| num(key, x))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(bad(key, v, "empty list"));
    }
    Ok(out)
}

fn flag(key: &str, v: &str) -> Result<bool, CliError> {
    match v.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T, CliError> {
    let v = v.trim();
    options
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(v))
        .map(|&(_, t)| t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            bad(key, v, format!("expected one of {}", names.join(", ")))
        })
}

/// Seeds as `a..b` (inclusive), a comma list, or a count `n` meaning `1..n`.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>, CliError> {
    let v = v.trim();
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (num("seeds", a)?, num("seeds", b.trim_start_matches('='))?);
        if b < a {
            return Err(bad("seeds", v, "empty range"));
        }
        return Ok((a..=b).collect());
    }
    if v.contains(',') {
        return list("seeds", v);
    }
    let n: u64 = num("seeds", v)?;
    if n == 0 {
        return Err(bad("seeds", v, "need at least one seed"));
    }
    Ok((1..=n).collect())
}

fn protocols(v: &str) -> Result<Vec<Protocol>, CliError> {
    if v.trim().eq_ignore_ascii_case("all") {
        return Ok(Protocol::ALL.to_vec());
    }
    v.split(',')
        .map(|p| {
            Protocol::parse(p.trim())
                .ok_or_else(|| bad("protocol", p, "expected DOT11, COOP_MAC or CANC_MAC"))
        })
        .collect()
}

impl ExperimentConfig {
    /// Applies one setting. Timing keys are in microseconds.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let b = &mut self.base;
        let us = |v: &str| -> Result<f64, CliError> { Ok(num::<f64>(key, v)? * 1e-6) };
        match key {
            "protocol" => self.protocols = protocols(value)?,
            "nodes" | "n_nodes" => self.nodes = list(key, value)?,
            "snr_db" | "avg_snr_db" => self.snr_db = list(key, value)?,
            "packet_bits" => {
                let v: Vec<i64> = list(key, value)?;
                if v.iter().any(|&x| x <= 0 || x > u32::MAX as i64) {
                    return Err(bad(key, value, "must be positive"));
                }
                self.packet_bits = v.into_iter().map(|x| x as u32).collect();
            }
            "seeds" => self.seeds = parse_seeds(value)?,
            "packets" | "n_packets" => b.n_packets = num(key, value)?,
            "scenario" => {
                let period = b.scenario.rotation_period.max(1);
                b.scenario = choice(
                    key,
                    value,
                    &[("s1", Scenario::s1()), ("s2", Scenario::s2(period))],
                )?;
                if b.scenario.kind == ScenarioKind::Rotating && b.scenario.rotation_period <= 1 {
                    b.scenario.rotation_period = 500;
                }
            }
            "rotation_period" => b.scenario.rotation_period = num(key, value)?,
            "fidelity" | "phy_fidelity" => {
                b.fidelity = choice(
                    key,
                    value,
                    &[("symbol", PhyFidelity::Symbol), ("rate", PhyFidelity::Rate)],
                )?
            }
            "modulation" => {
                b.modulation = choice(
                    key,
                    value,
                    &[("qpsk", Modulation::Qpsk), ("bpsk", Modulation::Bpsk)],
                )?
            }
            "relay_slots" | "n_relay_slots" => b.n_relay_slots = num(key, value)?,
            "anfl_capacity" => b.anfl_capacity = num(key, value)?,
            "n_pilots" => b.n_pilots = num(key, value)?,
            "cw_min" => b.cw_min = num(key, value)?,
            "cw_max" => b.cw_max = num(key, value)?,
            "retry_limit" => b.retry_limit = num(key, value)?,
            "sifs_us" => b.timing.sifs = us(value)?,
            "difs_us" => b.timing.difs = us(value)?,
            "slot_us" => b.timing.slot = us(value)?,
            "rts_us" => b.timing.rts = us(value)?,
            "cts_us" => b.timing.cts = us(value)?,
            "ctc_us" => b.timing.ctc = us(value)?,
            "ack_us" => b.timing.ack = us(value)?,
            "preamble_us" => b.timing.preamble = us(value)?,
            "tx_power" => b.tx_power = num(key, value)?,
            "noise_var" => b.noise_var = num(key, value)?,
            "bandwidth" => b.bandwidth = num(key, value)?,
            "cell_radius" => b.cell_radius = num(key, value)?,
            "path_loss_exp" => b.path_loss_exp = num(key, value)?,
            "active_senders" => {
                b.active_senders = match value.trim() {
                    "all" => None,
                    v => Some(num(key, v)?),
                }
            }
            "disable_coop" => b.disable_coop = flag(key, value)?,
            "disable_ancol" => b.disable_ancol = flag(key, value)?,
            "legacy_extra_slot" => b.legacy_extra_slot = flag(key, value)?,
            "noise_weighted_detection" => b.noise_weighted_detection = flag(key, value)?,
            "reciprocal" => b.reciprocal = flag(key, value)?,
            "mode_rule" => {
                b.mode_rule = choice(
                    key,
                    value,
                    &[
                        ("rate", ModeRule::RateComparison),
                        ("overhead", ModeRule::Overhead),
                    ],
                )?
            }
            "rate_gain_map" => {
                b.rate_gain_map = choice(
                    key,
                    value,
                    &[
                        ("ratio", RateGainMap::Ratio),
                        ("airtime", RateGainMap::Airtime),
                    ],
                )?
            }
            "coop_rate_form" => {
                b.coop_rate_form = choice(
                    key,
                    value,
                    &[
                        ("product", CoopRateForm::Product),
                        ("mrc", CoopRateForm::Mrc),
                    ],
                )?
            }
            "staleness" => {
                b.staleness = match value.trim() {
                    "frozen" => StalenessModel::Frozen,
                    v => match v.strip_prefix("decay:") {
                        Some(age) => StalenessModel::Decay {
                            max_age: num(key, age)?,
                        },
                        None => return Err(bad(key, v, "expected frozen or decay:<seconds>")),
                    },
                }
            }
            "backlog_window" => b.backlog_window = num(key, value)?,
            "rate_snr_gap_db" => b.rate_snr_gap_db = num(key, value)?,
            "max_events" => b.max_events = num(key, value)?,
            _ => {
                return Err(CliError::UnknownKey {
                    key: key.to_string(),
                    line: 0,
                })
            }
        }
        Ok(())
    }

    /// Applies a flat `key=value` text. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Syntax {
                    text: line.to_string(),
                    line: i + 1,
                });
            };
            self.set(k.trim(), v.trim()).map_err(|e| match e {
                CliError::UnknownKey { key, .. } => CliError::UnknownKey { key, line: i + 1 },
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// The single axis with more than one value, or `nodes` when nothing is
    /// swept.
    pub fn axis(&self) -> Result<Axis, CliError> {
        let multi: Vec<Axis> = Axis::ALL
            .into_iter()
            .filter(|&a| self.values(a).len() > 1)
            .collect();
        match multi.as_slice() {
            [] => Ok(Axis::Nodes),
            [a] => Ok(*a),
            [a, b, ..] => Err(CliError::MultipleAxes(a.as_str(), b.as_str())),
        }
    }

    pub fn values(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::Nodes => self.nodes.iter().map(|&n| n as f64).collect(),
            Axis::Snr => self.snr_db.clone(),
            Axis::PacketBits => self.packet_bits.iter().map(|&b| b as f64).collect(),
        }
    }

    /// Simulator configuration for one sweep point.
    pub fn point(&self, protocol: Protocol, seed: u64, axis: Axis, value: f64) -> SimConfig {
        let mut c = self.base.clone();
        c.protocol = protocol;
        c.seed = seed;
        c.n_nodes = self.nodes[0];
        c.avg_snr_db = self.snr_db[0];
        c.packet_bits = self.packet_bits[0];
        axis.apply(&mut c, value);
        c.record_trace = false;
        c
    }

    /// Checks every sweep point before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        let axis = self.axis()?;
        if self.seeds.is_empty() {
            return Err(bad("seeds", "", "need at least one seed"));
        }
        if self.protocols.is_empty() {
            return Err(bad("protocol", "", "need at least one protocol"));
        }
        for v in self.values(axis) {
            for &p in &self.protocols {
                self.point(p, self.seeds[0], axis, v).validate()?;
            }
        }
        Ok(())
    }

    /// Fully resolved settings as `key=value` lines; feeding them back
    /// through [`ExperimentConfig::from_text`] gives the same experiment.
    pub fn echo(&self) -> String {
        let b = &self.base;
        let join = |v: Vec<String>| v.join(",");
        let us = |s: f64| s * 1e6;
        let mut out = String::new();
        let protos: Vec<&str> = self.protocols.iter().map(|p| p.as_str()).collect();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("protocol", protos.join(","));
        kv(
            "nodes",
            join(self.nodes.iter().map(|x| x.to_string()).collect()),
        );
        kv(
            "snr_db",
            join(self.snr_db.iter().map(|x| x.to_string()).collect()),
        );
        kv(
            "packet_bits",
            join(self.packet_bits.iter().map(|x| x.to_string()).collect()),
        );
        kv(
            "seeds",
            join(self.seeds.iter().map(|x| x.to_string()).collect()),
        );
        kv("packets", b.n_packets.to_string());
        kv("scenario", b.scenario.as_str().to_string());
        kv("rotation_period", b.scenario.rotation_period.to_string());
        kv("fidelity", b.fidelity.as_str().to_string());
        kv("modulation", b.modulation.name().to_string());
        kv("relay_slots", b.n_relay_slots.to_string());
        kv("anfl_capacity", b.anfl_capacity.to_string());
        kv("n_pilots", b.n_pilots.to_string());
        kv("cw_min", b.cw_min.to_string());
        kv("cw_max", b.cw_max.to_string());
        kv("retry_limit", b.retry_limit.to_string());
        kv("sifs_us", us(b.timing.sifs).to_string());
        kv("difs_us", us(b.timing.difs).to_string());
        kv("slot_us", us(b.timing.slot).to_string());
        kv("rts_us", us(b.timing.rts).to_string());
        kv("cts_us", us(b.timing.cts).to_string());
        kv("ctc_us", us(b.timing.ctc).to_string());
        kv("ack_us", us(b.timing.ack).to_string());
        kv("preamble_us", us(b.timing.preamble).to_string());
        kv("tx_power", b.tx_power.to_string());
        kv("noise_var", b.noise_var.to_string());
        kv("bandwidth", b.bandwidth.to_string());
        kv("cell_radius", b.cell_radius.to_string());
        kv("path_loss_exp", b.path_loss_exp.to_string());
        kv(
            "active_senders",
            b.active_senders
                .map_or("all".to_string(), |k| k.to_string()),
        );
        kv("disable_coop", b.disable_coop.to_string());
        kv("disable_ancol", b.disable_ancol.to_string());
        kv("legacy_extra_slot", b.legacy_extra_slot.to_string());
        kv(
            "noise_weighted_detection",
            b.noise_weighted_detection.to_string(),
        );
        kv("reciprocal", b.reciprocal.to_string());
        kv("mode_rule", b.mode_rule.as_str().to_string());
        kv("rate_gain_map", b.rate_gain_map.as_str().to_string());
        kv(
            "coop_rate_form",
            match b.coop_rate_form {
                CoopRateForm::Product => "product",
                CoopRateForm::Mrc => "mrc",
            }
            .to_string(),
        );
        kv(
            "staleness",
            match b.staleness {
                StalenessModel::Frozen => "frozen".to_string(),
                StalenessModel::Decay { max_age } => format!("decay:{max_age}"),
            },
        );
        kv("backlog_window", b.backlog_window.to_string());
        kv("rate_snr_gap_db", b.rate_snr_gap_db.to_string());
        kv("max_events", b.max_events.to_string());
        out
    }
}

/// Recovers the echoed configuration from the `# key=value` header of an
/// output file.
pub fn config_from_output(text: &str) -> Result<ExperimentConfig, CliError> {
    let echoed: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| l.contains('='))
        .map(|l| format!("{l}\n"))
        .collect();
    ExperimentConfig::from_text(&echoed)
}
