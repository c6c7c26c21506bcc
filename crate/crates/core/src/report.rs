//! CSV output. Column order is fixed; floats carry 6 significant digits.
//!
//! `summary.csv`: preset, seeds, policy, v, k, user, distance_m, rate_mbps,
//! delay_slots, delay_ms, backlog_bits, backlog_mbit, utility, avg_power_w
//!
//! `gains.csv`: preset, v, k, baseline, utility_gain, delay_ratio
//!
//! `trace.csv`: policy, v, seed, t, user, q_bits, r_bits, b_bits, p_w, z

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::experiments::ComparisonReport;

pub const SUMMARY_HEADER: [&str; 14] = [
    "preset",
    "seeds",
    "policy",
    "v",
    "k",
    "user",
    "distance_m",
    "rate_mbps",
    "delay_slots",
    "delay_ms",
    "backlog_bits",
    "backlog_mbit",
    "utility",
    "avg_power_w",
];

pub const GAINS_HEADER: [&str; 6] = ["preset", "v", "k", "baseline", "utility_gain", "delay_ratio"];

pub const TRACE_HEADER: [&str; 10] = ["policy", "v", "seed", "t", "user", "q_bits", "r_bits", "b_bits", "p_w", "z"];

/// `%g`-style rendering with 6 significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn with_path(e: std::io::Error, path: &Path) -> std::io::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

fn join_seeds(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_summary<W: Write>(report: &ComparisonReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for p in &report.points {
        for i in 0..p.k() {
            w.write_record([
                p.preset.clone(),
                join_seeds(&p.seeds),
                p.policy.tag().to_string(),
                fmt_sig6(p.v),
                p.k().to_string(),
                (i + 1).to_string(),
                fmt_sig6(p.distances[i]),
                fmt_sig6(p.rate_mbps[i]),
                fmt_sig6(p.delay_slots[i]),
                fmt_sig6(p.delay_ms[i]),
                fmt_sig6(p.backlog_bits[i]),
                fmt_sig6(p.backlog_mbit[i]),
                fmt_sig6(p.utility),
                fmt_sig6(p.avg_power_w),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_gains<W: Write>(report: &ComparisonReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAINS_HEADER)?;
    for g in &report.gains {
        w.write_record([
            g.preset.clone(),
            fmt_sig6(g.v),
            g.k.to_string(),
            g.baseline.tag().to_string(),
            fmt_sig6(g.utility_gain),
            fmt_sig6(g.delay_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the number of trace rows written.
pub fn write_traces<W: Write>(report: &ComparisonReport, out: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let mut n = 0;
    for run in &report.runs {
        for row in &run.metrics.traces {
            w.write_record([
                run.policy.tag().to_string(),
                fmt_sig6(run.v),
                run.seed.to_string(),
                row.t.to_string(),
                (row.user + 1).to_string(),
                row.q_bits.to_string(),
                row.admitted_bits.to_string(),
                row.capacity_bits.to_string(),
                fmt_sig6(row.power_w),
                fmt_sig6(row.z),
            ])?;
            n += 1;
        }
    }
    w.flush()?;
    Ok(n)
}

/// Writes summary.csv and gains.csv, plus trace.csv when any run kept traces.
pub fn write_report(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| with_path(e, dir))?;
    let create = |p: &Path| fs::File::create(p).map_err(|e| with_path(e, p));
    let mut written = Vec::new();
    let summary = dir.join("summary.csv");
    write_summary(report, create(&summary)?)?;
    written.push(summary);
    let gains = dir.join("gains.csv");
    write_gains(report, create(&gains)?)?;
    written.push(gains);
    if report.runs.iter().any(|r| !r.metrics.traces.is_empty()) {
        let trace = dir.join("trace.csv");
        write_traces(report, create(&trace)?)?;
        written.push(trace);
    }
    Ok(written)
}
