//! Output artifacts: CSV power maps, PPM heatmaps, run reports and run comparisons.
//!
//! The heatmap colours each cell by a 1 dB bin of its CSV value on a fixed
//! scale. Bins below the scale clamp to the first colour; cells without power
//! are black. Image row `j` is grid row `j` (increasing `y`), column `i` is
//! grid column `i`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link::{CoverageStats, LinkBudget, PowerMap};
use crate::pathfinder::LaunchConfig;

pub const CSV_HEADER: &str = "x_m,y_m,z_m,p_dbm,covered";

/// Default heatmap scale bounds, dBm.
pub const HEATMAP_MIN_DBM: f64 = -130.0;
pub const HEATMAP_MAX_DBM: f64 = -30.0;

/// Colour stops of the ramp, evenly spaced from the low to the high bound.
const RAMP: [[u8; 3]; 5] = [[0, 0, 128], [0, 128, 255], [0, 200, 80], [255, 220, 0], [220, 0, 0]];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("grids differ: {0}")]
    GridMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub p_dbm: f64,
    pub covered: bool,
}

fn fmt_dbm(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        // Shortest representation that parses back to the same value.
        format!("{v}")
    }
}

/// One row per grid point in grid order.
pub fn write_csv(map: &PowerMap, budget: &LinkBudget) -> String {
    let mut out = String::with_capacity(map.values.len() * 40);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (p, &v) in map.grid.points().iter().zip(&map.values) {
        let covered = u8::from(budget.covers(v));
        let _ = writeln!(out, "{:.4},{:.4},{:.4},{},{}", p.x, p.y, p.z, fmt_dbm(v), covered);
    }
    out
}

pub fn read_csv(text: &str) -> Result<Vec<CsvRow>, ReportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(ReportError::Csv {
                line: 1,
                msg: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| ReportError::Csv { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad number `{s}`: {e}")));
        let covered = match fields[4] {
            "1" => true,
            "0" => false,
            other => return Err(err(format!("bad covered flag `{other}`"))),
        };
        rows.push(CsvRow {
            x: num(fields[0])?,
            y: num(fields[1])?,
            z: num(fields[2])?,
            p_dbm: num(fields[3])?,
            covered,
        });
    }
    Ok(rows)
}

/// Colour of a power value on the `[lo, hi]` scale, quantized to 1 dB bins.
pub fn ramp_color(v: f64, lo: f64, hi: f64) -> [u8; 3] {
    if !v.is_finite() {
        return [0, 0, 0];
    }
    let bins = ((hi - lo).round() as i64).max(1);
    let bin = ((v - lo).floor() as i64).clamp(0, bins - 1);
    let u = (bin as f64 + 0.5) / bins as f64;
    let x = u * (RAMP.len() - 1) as f64;
    let k = (x.floor() as usize).min(RAMP.len() - 2);
    let t = x - k as f64;
    let mut c = [0u8; 3];
    for (ch, out) in c.iter_mut().enumerate() {
        let a = RAMP[k][ch] as f64;
        let b = RAMP[k + 1][ch] as f64;
        *out = (a + (b - a) * t).round() as u8;
    }
    c
}

/// Binary PPM (P6) image with one pixel per grid point.
pub fn heatmap_ppm(map: &PowerMap, lo: f64, hi: f64) -> Vec<u8> {
    let (nx, ny) = map.grid.dims();
    let mut out = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    out.reserve(nx * ny * 3);
    for &v in &map.values {
        out.extend_from_slice(&ramp_color(v, lo, hi));
    }
    out
}

/// Reproducibility record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_hash: String,
    pub engine: LaunchConfig,
    pub n_freq_samples: usize,
    pub grid_points: usize,
    pub stats: CoverageStats,
    /// Not part of any data output; varies between identical runs.
    pub wall_clock_s: f64,
    pub outputs: Vec<String>,
}

/// Cellwise and summary differences `a - b` between two runs on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub cells: usize,
    pub covered_fraction_delta: f64,
    pub blind_spot_delta: i64,
    pub mean_delta_db: f64,
    pub max_abs_delta_db: f64,
    #[serde(skip)]
    pub delta_db: Vec<f64>,
}

/// Difference of two power values, zero where both are equal (including both `-inf`).
pub fn db_delta(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

pub fn compare(
    a_rows: &[CsvRow],
    a_stats: &CoverageStats,
    b_rows: &[CsvRow],
    b_stats: &CoverageStats,
) -> Result<Comparison, ReportError> {
    if a_rows.len() != b_rows.len() {
        return Err(ReportError::GridMismatch(format!("{} vs {} cells", a_rows.len(), b_rows.len())));
    }
    let mut delta_db = Vec::with_capacity(a_rows.len());
    for (i, (a, b)) in a_rows.iter().zip(b_rows).enumerate() {
        if (a.x - b.x).abs() > 1e-6 || (a.y - b.y).abs() > 1e-6 || (a.z - b.z).abs() > 1e-6 {
            return Err(ReportError::GridMismatch(format!(
                "cell {i} at ({}, {}, {}) vs ({}, {}, {})",
                a.x, a.y, a.z, b.x, b.y, b.z
            )));
        }
        delta_db.push(db_delta(a.p_dbm, b.p_dbm));
    }
    let finite: Vec<f64> = delta_db.iter().copied().filter(|d| d.is_finite()).collect();
    let mean_delta_db = if finite.is_empty() {
        0.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let max_abs_delta_db = finite.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(Comparison {
        cells: delta_db.len(),
        covered_fraction_delta: a_stats.covered_fraction - b_stats.covered_fraction,
        blind_spot_delta: a_stats.blind_spots as i64 - b_stats.blind_spots as i64,
        mean_delta_db,
        max_abs_delta_db,
        delta_db,
    })
}

/// Delta map as CSV: `x_m,y_m,z_m,delta_db`.
pub fn write_delta_csv(rows: &[CsvRow], c: &Comparison) -> String {
    let mut out = String::from("x_m,y_m,z_m,delta_db\n");
    for (r, d) in rows.iter().zip(&c.delta_db) {
        let _ = writeln!(out, "{:.4},{:.4},{:.4},{}", r.x, r.y, r.z, d);
    }
    out
}
