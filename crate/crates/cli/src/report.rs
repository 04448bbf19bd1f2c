//! Output formats. Reports are CSV; moment tables, bounds and validation
//! results are TOML documents.

use std::path::Path;

use hyperplane_moments::validation::ValidationReport;
use hyperplane_moments::{BoundsReport, EstimateSummary, MomentTable};
use serde::Serialize;

use crate::error::CliError;

pub const CSV_HEADER: [&str; 10] = [
    "k",
    "r",
    "s",
    "oracle_value",
    "mc_mean",
    "mc_std_error",
    "z_score",
    "estimator_id",
    "replicates",
    "wall_time",
];

/// 17 significant digits in scientific notation. Rust never localises the
/// decimal separator, so this is always '.'.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// One report row per estimate; `wall_time` is left empty unless requested.
pub fn write_csv<W: std::io::Write>(
    out: W,
    rows: &[EstimateSummary],
    wall_time: bool,
) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for e in rows {
        let t = &e.target;
        w.write_record([
            t.k.to_string(),
            t.r.to_string(),
            t.s.map(|s| s.to_string()).unwrap_or_default(),
            fmt_opt(e.oracle_value),
            fmt_f64(e.mean),
            fmt_f64(e.std_error),
            fmt_opt(e.z_score),
            t.estimator.id().to_string(),
            e.replicates.to_string(),
            if wall_time {
                fmt_f64(e.wall_time)
            } else {
                String::new()
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct MomentFile<'a> {
    pub k: usize,
    pub d: usize,
    pub intensity: f64,
    /// Cell intensity `gamma`.
    pub gamma: f64,
    pub first_moments: &'a [f64],
    pub second_moments: &'a [Vec<f64>],
    pub covariance: &'a [Vec<f64>],
    pub symmetry_discrepancy: f64,
    pub min_covariance_eigenvalue: f64,
    pub bounds: BoundsFile,
}

#[derive(Debug, Serialize)]
pub struct BoundsFile {
    pub k: usize,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_upper: Option<f64>,
    pub within_bounds: bool,
}

impl From<&BoundsReport> for BoundsFile {
    fn from(b: &BoundsReport) -> Self {
        BoundsFile {
            k: b.k,
            variance: b.variance,
            lower: b.lower,
            upper: b.upper,
            phi: b.phi,
            phi_lower: b.phi_lower,
            phi_upper: b.phi_upper,
            within_bounds: b.within_bounds(BOUNDS_SLACK),
        }
    }
}

/// Absolute slack when reporting whether a value respects its bounds.
pub const BOUNDS_SLACK: f64 = 1e-8;

pub fn moment_file_text(table: &MomentTable, bounds: &BoundsReport) -> String {
    let f = MomentFile {
        k: table.k,
        d: table.d,
        intensity: table.intensity,
        gamma: table.cell_intensity,
        first_moments: &table.first_moments,
        second_moments: &table.second_moments,
        covariance: &table.covariances,
        symmetry_discrepancy: table.symmetry_discrepancy,
        min_covariance_eigenvalue: table.min_covariance_eigenvalue,
        bounds: bounds.into(),
    };
    toml::to_string(&f).expect("moment table serialises")
}

#[derive(Debug, Serialize)]
pub struct BoundsDocument {
    pub d: usize,
    pub intensity: f64,
    pub volume_product: f64,
    pub volume_variance_ratio: f64,
    pub bounds: Vec<BoundsFile>,
}

#[derive(Debug, Serialize)]
struct ValidationDocument<'a> {
    passed: bool,
    check: Vec<CheckEntry<'a>>,
}

#[derive(Debug, Serialize)]
struct CheckEntry<'a> {
    name: &'a str,
    passed: bool,
    measured: f64,
    tolerance: f64,
    detail: &'a str,
}

pub fn validation_text(report: &ValidationReport) -> String {
    let doc = ValidationDocument {
        passed: report.all_passed(),
        check: report
            .checks
            .iter()
            .map(|c| CheckEntry {
                name: &c.name,
                passed: c.passed,
                measured: c.measured,
                tolerance: c.tolerance,
                detail: &c.detail,
            })
            .collect(),
    };
    toml::to_string(&doc).expect("validation report serialises")
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(16.0), "1.6000000000000000e1");
        let x = std::f64::consts::PI * 1e-7;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}
