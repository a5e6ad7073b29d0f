//! File formats: trajectory CSV and network JSON.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use diland::metrics::Trajectory;
use diland::network::Network;

pub const CSV_HEADER: &str = "t,mse,rebuild_failures";

/// Shortest decimal that round-trips, with `.0` on integral values.
///
/// Rust's `Display` for `f64` never uses exponent notation, so the output is
/// plain decimal and carries the full 17 significant digits when needed.
pub fn format_float(x: f64) -> String {
    let s = x.to_string();
    if x.is_finite() && !s.contains('.') {
        s + ".0"
    } else {
        s
    }
}

pub fn trajectory_csv(traj: &Trajectory<f64>) -> String {
    let mut out = String::with_capacity(32 * (traj.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &traj.records {
        let _ = writeln!(out, "{},{},{}", r.t, format_float(r.mse), r.rebuild_failures);
    }
    out
}

pub fn write_trajectory_csv(traj: &Trajectory<f64>, path: &Path) -> io::Result<()> {
    fs::write(path, trajectory_csv(traj))
}

/// Per-sensor squared errors: `t,s0,s1,...`, one row per recorded iteration.
pub fn sensor_errors_csv(traj: &Trajectory<f64>) -> String {
    let n = traj.sensor_errors.first().map_or(0, |r| r.squared_errors.len());
    let mut out = String::from("t");
    for i in 0..n {
        let _ = write!(out, ",s{i}");
    }
    out.push('\n');
    for r in &traj.sensor_errors {
        let _ = write!(out, "{}", r.t);
        for &e in &r.squared_errors {
            let _ = write!(out, ",{}", format_float(e));
        }
        out.push('\n');
    }
    out
}

pub fn write_sensor_errors_csv(traj: &Trajectory<f64>, path: &Path) -> io::Result<()> {
    fs::write(path, sensor_errors_csv(traj))
}

pub fn network_json(net: &Network<f64>) -> String {
    serde_json::to_string_pretty(net).expect("network serializes") + "\n"
}

pub fn write_network_json(net: &Network<f64>, path: &Path) -> io::Result<()> {
    fs::write(path, network_json(net))
}

pub fn read_network_json(path: &Path) -> io::Result<Network<f64>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
