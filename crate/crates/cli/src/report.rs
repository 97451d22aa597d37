//! Report schema and artifact writers.
//!
//! Every subcommand produces one [`Report`]: schema version, the full
//! configuration echo, provenance (grid and tolerance fingerprints plus
//! wall time), a results payload, and named check outcomes with their
//! measured values. The JSON artifact holds everything and round-trips
//! losslessly; CSV artifacts carry plot-facing tables, one curve per
//! file; a plain-text summary goes to stdout.
//!
//! The payload is deterministic for a given configuration and cache
//! state. Wall time is the single timestamp-like field, so repeated
//! warm runs produce byte-identical reports once it is excluded.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub provenance: Provenance,
    pub results: serde_json::Value,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub grid_hash: String,
    pub tol_hash: String,
    /// Wall-clock seconds of this invocation — the one field excluded
    /// from bit-identity comparisons between repeated runs.
    pub wall_time_s: f64,
}

/// One named invariant with its measured value and requirement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub measured: f64,
    pub required: String,
    pub pass: bool,
}

impl CheckOutcome {
    pub fn le(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            measured,
            required: format!("<= {bound:e}"),
            pass: measured <= bound,
        }
    }

    pub fn lt(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            measured,
            required: format!("< {bound:e}"),
            pass: measured < bound,
        }
    }

    pub fn ge(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            measured,
            required: format!(">= {bound:e}"),
            pass: measured >= bound,
        }
    }

    pub fn gt(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            measured,
            required: format!("> {bound:e}"),
            pass: measured > bound,
        }
    }

    /// |measured − target| ≤ slack, reported against the target.
    pub fn near(name: impl Into<String>, measured: f64, target: f64, slack: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            measured,
            required: format!("= {target} ± {slack}"),
            pass: (measured - target).abs() <= slack,
        }
    }

    /// Relative deviation from a target: |measured − target| / |target|.
    pub fn within_rel(name: impl Into<String>, measured: f64, target: f64, rel: f64) -> Self {
        let dev = (measured - target).abs() / target.abs();
        CheckOutcome {
            name: name.into(),
            measured: dev,
            required: format!("relative deviation from {target:e} <= {rel:e}"),
            pass: dev <= rel,
        }
    }

    pub fn count(name: impl Into<String>, measured: usize, required: usize) -> Self {
        CheckOutcome {
            name: name.into(),
            measured: measured as f64,
            required: format!("== {required}"),
            pass: measured == required,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        CheckOutcome {
            name: name.into(),
            measured: if ok { 1.0 } else { 0.0 },
            required: "== 1".into(),
            pass: ok,
        }
    }
}

pub fn all_pass(checks: &[CheckOutcome]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Write bytes through a same-directory temp file and an atomic rename,
/// so a crash cannot leave a partial artifact at the final path.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut file = tempfile::NamedTempFile::new_in(dir)?;
    file.write_all(bytes)?;
    file.flush()?;
    file.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Pretty JSON artifact with a trailing newline.
pub fn write_json(dir: &Path, stem: &str, report: &Report) -> std::io::Result<PathBuf> {
    let path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Render one numeric table. Floats print in shortest round-trip form,
/// so the same numbers always produce the same bytes.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(
    dir: &Path,
    stem: &str,
    header: &[&str],
    rows: &[Vec<f64>],
) -> std::io::Result<PathBuf> {
    let path = dir.join(format!("{stem}.csv"));
    write_atomic(&path, csv_table(header, rows).as_bytes())?;
    Ok(path)
}

/// Name/value scalar table for quantities that are not curves.
pub fn write_csv_scalars(
    dir: &Path,
    stem: &str,
    rows: &[(&str, f64)],
) -> std::io::Result<PathBuf> {
    let path = dir.join(format!("{stem}.csv"));
    let mut out = String::from("name,value\n");
    for (name, value) in rows {
        out.push_str(&format!("{name},{value}\n"));
    }
    write_atomic(&path, out.as_bytes())?;
    Ok(path)
}

/// Plain-text summary: every check with its measured value, then the
/// overall verdict line.
pub fn print_summary(report: &Report) {
    let name_w = report
        .checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(4)
        .max(4);
    println!("\n{} report (schema v{})", report.command, report.schema_version);
    println!(
        "grid {}  tolerances {}  wall {:.2}s",
        report.provenance.grid_hash, report.provenance.tol_hash, report.provenance.wall_time_s
    );
    println!("{:-<w$}", "", w = name_w + 46);
    for c in &report.checks {
        println!(
            "{:w$}  {:>12.6e}  {:<24} {}",
            c.name,
            c.measured,
            c.required,
            if c.pass { "pass" } else { "FAIL" },
            w = name_w
        );
    }
    println!("{:-<w$}", "", w = name_w + 46);
    let failed = report.checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        println!("all {} checks passed", report.checks.len());
    } else {
        println!("{failed} of {} checks FAILED", report.checks.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            command: "solve".into(),
            config: RunConfig::default(),
            provenance: Provenance {
                grid_hash: "abc".into(),
                tol_hash: "def".into(),
                wall_time_s: 0.125,
            },
            results: serde_json::json!({"m": 3.5, "residual": 2.5e-11}),
            checks: vec![
                CheckOutcome::le("residual", 2.5e-11, 1e-8),
                CheckOutcome::near("slope", 1.99, 2.0, 0.1),
            ],
        }
    }

    #[test]
    fn report_round_trips_losslessly() {
        let rep = sample_report();
        let text = serde_json::to_string_pretty(&rep).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        let again = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn csv_is_deterministic_and_exact() {
        let rows = vec![vec![1.0, 0.1], vec![10.0, 2.5e-11]];
        let a = csv_table(&["omega", "residual"], &rows);
        let b = csv_table(&["omega", "residual"], &rows);
        assert_eq!(a, b);
        assert!(a.starts_with("omega,residual\n1,0.1\n"));
        let parsed: f64 = a.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 2.5e-11);
    }

    #[test]
    fn check_helpers_encode_pass_and_fail() {
        assert!(CheckOutcome::le("a", 1.0, 1.0).pass);
        assert!(!CheckOutcome::lt("a", 1.0, 1.0).pass);
        assert!(CheckOutcome::within_rel("a", 0.0135, 1.0 / 75.0, 0.15).pass);
        assert!(!CheckOutcome::within_rel("a", 0.017, 1.0 / 75.0, 0.15).pass);
        assert!(CheckOutcome::count("a", 1, 1).pass);
        assert!(!CheckOutcome::flag("a", false).pass);
    }

    #[test]
    fn atomic_writes_land_complete() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.txt");
        write_atomic(&path, b"payload").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"payload");
        write_atomic(&path, b"replaced").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"replaced");
    }
}
