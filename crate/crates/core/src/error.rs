use thiserror::Error;

/// Invalid simulator configuration, reported before any event runs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{key} = {value} is out of range (expected {expected})")]
    OutOfRange {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("inconsistent configuration: {0}")]
    Inconsistent(String),
}

/// Errors raised by the symbol-level PHY model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhyError {
    #[error("{bits} bits is not a multiple of {per_symbol} bits per symbol")]
    BitLength { bits: usize, per_symbol: usize },
    #[error("stream length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("every candidate pair is equidistant from the observation")]
    DegenerateGeometry,
}

/// A frame that violates its structural invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed {kind} frame: {reason}")]
pub struct MalformedFrame {
    pub kind: &'static str,
    pub reason: &'static str,
}
