//! Discrete-event simulator of a single-cell WLAN comparing 802.11 DCF,
//! two-slot amplify-and-forward cooperation, and overlapped analog network
//! coding with joint ML detection.

pub mod channel;
pub mod config;
pub mod error;
pub mod mac;
pub mod phy;
pub mod rate;
pub mod sim;

pub use channel::{ComplexGain, FlowRoles, LinkTable, NodeId, NoiseModel};
pub use config::{
    MacTiming, ModeRule, PhyFidelity, Protocol, RateGainMap, Scenario, ScenarioKind, SimConfig,
    StalenessModel,
};
pub use error::{ConfigError, MalformedFrame, PhyError};
pub use mac::{Frame, FrameKind, ModeDecision, TxMode};
pub use phy::{Constellation, Modulation};
pub use rate::{CoopRateForm, OverheadProfile, RateEstimateRow};
pub use sim::{check_trace, collect, run, Metrics, RunOutput, TraceRecord};
