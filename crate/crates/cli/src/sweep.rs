//! Sweeps over one axis, run in parallel and reported in a fixed order.

use std::fmt::Write as _;

use cancsim_core::sim::{run, Metrics};
use cancsim_core::{Protocol, SimConfig};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::{Axis, CliError, ExperimentConfig};

pub const CSV_COLUMNS: &str = "protocol,axis_name,axis_value,seed,throughput_bps,mean_delay_us,p95_delay_us,share_direct,share_coop,share_ancol,retx_count";

pub const SUMMARY_COLUMNS: &str = "protocol,axis_name,axis_value,n_seeds,throughput_mean,throughput_ci95,mean_delay_us_mean,mean_delay_us_ci95,share_direct,share_coop,share_ancol,retx_mean";

/// Schema version written in the output header.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub protocol: Protocol,
    pub axis: Axis,
    pub value: f64,
    pub seed: u64,
    pub throughput_bps: f64,
    pub mean_delay_us: f64,
    pub p95_delay_us: f64,
    pub shares: (f64, f64, f64),
    pub retx: u64,
}

impl Row {
    pub fn from_metrics(protocol: Protocol, axis: Axis, value: f64, seed: u64, m: &Metrics) -> Row {
        Row {
            protocol,
            axis,
            value,
            seed,
            throughput_bps: m.throughput_bps,
            mean_delay_us: m.mean_delay() * 1e6,
            p95_delay_us: m.delay_percentile(0.95) * 1e6,
            shares: m.modes.shares(),
            retx: m.retransmissions,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.6},{:.6},{:.6},{}",
            self.protocol,
            self.axis.as_str(),
            self.value,
            self.seed,
            self.throughput_bps,
            self.mean_delay_us,
            self.p95_delay_us,
            self.shares.0,
            self.shares.1,
            self.shares.2,
            self.retx
        )
    }
}

/// Runs one sweep point.
pub fn run_point(cfg: &SimConfig, axis: Axis, value: f64) -> Result<Row, CliError> {
    let out = run(cfg).map_err(|source| CliError::Run {
        config: format!(
            "protocol={} {}={} seed={}",
            cfg.protocol,
            axis.as_str(),
            value,
            cfg.seed
        ),
        source,
    })?;
    if out.metrics.truncated {
        log::warn!(
            "{} {}={} seed {} hit the event limit",
            cfg.protocol,
            axis.as_str(),
            value,
            cfg.seed
        );
    }
    Ok(Row::from_metrics(
        cfg.protocol,
        axis,
        value,
        cfg.seed,
        &out.metrics,
    ))
}

/// All rows, ordered by axis value, then protocol, then seed.
pub fn sweep(exp: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    exp.validate()?;
    let axis = exp.axis()?;
    let mut jobs = Vec::new();
    for v in exp.values(axis) {
        for &p in &exp.protocols {
            for &s in &exp.seeds {
                jobs.push((exp.point(p, s, axis, v), v));
            }
        }
    }
    jobs.par_iter()
        .map(|(c, v)| run_point(c, axis, *v))
        .collect()
}

/// Sample mean and half-width of the two-sided 95% Student-t interval.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub protocol: Protocol,
    pub axis: Axis,
    pub value: f64,
    pub n: usize,
    pub throughput: (f64, f64),
    pub delay_us: (f64, f64),
    pub shares: (f64, f64, f64),
    pub retx: f64,
}

impl Summary {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.6},{:.6},{:.6},{:.3}",
            self.protocol,
            self.axis.as_str(),
            self.value,
            self.n,
            self.throughput.0,
            self.throughput.1,
            self.delay_us.0,
            self.delay_us.1,
            self.shares.0,
            self.shares.1,
            self.shares.2,
            self.retx
        )
    }
}

/// Aggregates rows over seeds, keeping the row order of first appearance.
pub fn summarize(rows: &[Row]) -> Vec<Summary> {
    let mut keys: Vec<(Protocol, Axis, f64)> = Vec::new();
    for r in rows {
        let k = (r.protocol, r.axis, r.value);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(protocol, axis, value)| {
            let g: Vec<&Row> = rows
                .iter()
                .filter(|r| r.protocol == protocol && r.axis == axis && r.value == value)
                .collect();
            let col = |f: &dyn Fn(&Row) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
            let avg = |f: &dyn Fn(&Row) -> f64| mean_ci95(&col(f)).0;
            Summary {
                protocol,
                axis,
                value,
                n: g.len(),
                throughput: mean_ci95(&col(&|r| r.throughput_bps)),
                delay_us: mean_ci95(&col(&|r| r.mean_delay_us)),
                shares: (
                    avg(&|r| r.shares.0),
                    avg(&|r| r.shares.1),
                    avg(&|r| r.shares.2),
                ),
                retx: avg(&|r| r.retx as f64),
            }
        })
        .collect()
}

/// Output file contents: versioned header, echoed configuration, then rows.
pub fn render(exp: &ExperimentConfig, rows: &[Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# cancsim sweep schema v{SCHEMA_VERSION}");
    for line in exp.echo().lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{CSV_COLUMNS}");
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

pub fn render_summary(summaries: &[Summary]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SUMMARY_COLUMNS}");
    for s in summaries {
        let _ = writeln!(out, "{}", s.to_csv());
    }
    out
}
