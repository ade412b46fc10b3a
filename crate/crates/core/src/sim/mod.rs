//! Simulation engine, trace and metrics.

pub mod adjudicate;
pub mod engine;
pub mod event;
pub mod invariants;
pub mod metrics;
pub mod topology;
pub mod trace;

pub use engine::{run, Engine, RunOutput};
pub use invariants::{check_conservation, check_trace, Violation};
pub use metrics::{collect, Metrics, ModeCounts};
pub use topology::{build_topology, Topology};
pub use trace::{write_csv, Outcome, TraceKind, TraceRecord, CSV_HEADER};
