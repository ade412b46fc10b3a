use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use cancsim_core::sim::{run, write_csv};
use cancsim_runner::{
    config_from_output, render, render_summary, summarize, sweep, CliError, ExperimentConfig,
};
use clap::Parser;

/// Single-cell WLAN simulator: 802.11 DCF, COOP-MAC and CANC-MAC.
///
/// Settings are layered: built-in defaults, then `--config` (or
/// `--replay`), then flags. At most one of --nodes, --snr-db and
/// --packet-bits may list several comma-separated values; that one is
/// swept.
#[derive(Debug, Parser)]
#[command(name = "cancsim", version)]
struct Args {
    /// DOT11, COOP_MAC, CANC_MAC, a comma list, or `all`.
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long = "snr-db")]
    snr_db: Option<String>,
    #[arg(long = "packet-bits")]
    packet_bits: Option<String>,
    #[arg(long, value_parser = ["s1", "s2"])]
    scenario: Option<String>,
    /// Seed count `n` (1..n), a range `a..b`, or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Packets delivered or dropped per run.
    #[arg(long)]
    packets: Option<String>,
    #[arg(long, value_parser = ["symbol", "rate"])]
    fidelity: Option<String>,
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run the configuration echoed in an earlier output file.
    #[arg(long, conflicts_with = "config")]
    replay: Option<PathBuf>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Per-seed CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed-aggregated CSV with 95% confidence intervals.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Event trace of a single run (requires exactly one sweep point).
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn resolve(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut exp = match (&args.config, &args.replay) {
        (Some(p), _) => ExperimentConfig::from_text(&read(p)?)?,
        (None, Some(p)) => config_from_output(&read(p)?)?,
        (None, None) => ExperimentConfig::default(),
    };
    let flags = [
        ("protocol", &args.protocol),
        ("nodes", &args.nodes),
        ("snr_db", &args.snr_db),
        ("packet_bits", &args.packet_bits),
        ("scenario", &args.scenario),
        ("seeds", &args.seeds),
        ("packets", &args.packets),
        ("fidelity", &args.fidelity),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            exp.set(k, v)?;
        }
    }
    for kv in &args.set {
        exp.apply_text(kv)?;
    }
    exp.validate()?;
    Ok(exp)
}

fn trace_run(exp: &ExperimentConfig, path: &PathBuf) -> Result<(), CliError> {
    let axis = exp.axis()?;
    let values = exp.values(axis);
    if values.len() != 1 || exp.protocols.len() != 1 || exp.seeds.len() != 1 {
        return Err(CliError::BadValue {
            key: "trace".into(),
            value: path.display().to_string(),
            reason: "needs a single protocol, seed and axis value".into(),
        });
    }
    let mut c = exp.point(exp.protocols[0], exp.seeds[0], axis, values[0]);
    c.record_trace = true;
    let out = run(&c)?;
    let mut buf = Vec::new();
    write_csv(&out.trace, &mut buf).expect("writing to memory");
    write(path, &String::from_utf8(buf).expect("trace is ASCII"))
}

fn main_inner() -> Result<(), CliError> {
    let args = Args::parse();
    let exp = resolve(&args)?;
    log::info!("resolved configuration:\n{}", exp.echo());
    if let Some(p) = &args.trace {
        trace_run(&exp, p)?;
    }
    let rows = sweep(&exp)?;
    let text = render(&exp, &rows);
    match &args.out {
        Some(p) => write(p, &text)?,
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    let summary = render_summary(&summarize(&rows));
    match &args.summary {
        Some(p) => write(p, &summary)?,
        None => eprint!("{summary}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
