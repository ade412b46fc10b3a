//! Configuration layering, parameter sweeps and CSV output for the
//! `cancsim` binary.

pub mod config;
pub mod sweep;

pub use config::{config_from_output, parse_seeds, Axis, CliError, ExperimentConfig};
pub use sweep::{
    mean_ci95, render, render_summary, run_point, summarize, sweep, Row, Summary, CSV_COLUMNS,
};
