//! Output files: CSV tables with 17 significant digits and pretty JSON.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fields::SpacetimeSolution;

/// `x` with 17 significant digits, as `d.dddddddddddddddde±x`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV table; `rows` hold numbers only.
pub fn write_table(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV table of already formatted fields.
pub fn write_records(path: &Path, headers: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format solution table `t,x,E,u,sigma`, one row per saved time and grid point.
pub fn write_solution_csv(path: &Path, sol: &SpacetimeSolution) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "E", "u", "sigma"])?;
    for s in &sol.states {
        let t = fmt_float(s.t);
        for i in 0..s.len() {
            w.write_record([
                t.as_str(),
                &fmt_float(sol.grid.x(i)),
                &fmt_float(s.e[i]),
                &fmt_float(s.u[i]),
                &fmt_float(s.sigma[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Short stable identifier of a configuration text and seed.
pub fn run_id(config_text: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    h.update(seed.to_le_bytes());
    hex::encode(&h.finalize()[..8])
}
