//! CSV and manifest files.
//!
//! Schemas:
//! - histogram: `n,probability`
//! - trajectory: `t,n,probability` (long format)
//! - snapshots: `event,n,probability`
//! - summary: `t,l2_to_equilibrium,debt,mass_defect`
//! - exact marginal: `n,p_num,p_den,p_decimal`

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use exchange_lab_core::integrate::StepDiagnostics;
use exchange_lab_core::WealthDistribution;
use num_rational::BigRational as Rational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

/// Rows with zero probability are skipped.
pub fn write_histogram(path: &Path, p: &WealthDistribution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["n", "probability"])?;
    for (n, v) in p.iter().filter(|(_, v)| *v != 0.0) {
        w.write_record([n.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format rows `label,n,probability` for every stored distribution.
pub fn write_long<T: std::fmt::Display>(
    path: &Path,
    label: &str,
    rows: &[(T, &WealthDistribution)],
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([label, "n", "probability"])?;
    for (t, p) in rows {
        for (n, v) in p.iter().filter(|(_, v)| *v != 0.0) {
            w.write_record([t.to_string(), n.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, diagnostics: &[StepDiagnostics]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "l2_to_equilibrium", "debt", "mass_defect"])?;
    for d in diagnostics {
        let l2 = d.l2_to_reference.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([d.t.to_string(), l2, d.debt.to_string(), d.mass_defect.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Decimal rendering of an exact probability (shortest round-trip f64).
pub fn rational_decimal(p: &Rational) -> String {
    p.to_f64().map_or_else(|| "nan".into(), |x| x.to_string())
}

pub fn write_exact(path: &Path, rows: &[(i64, Rational)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["n", "p_num", "p_den", "p_decimal"])?;
    for (n, p) in rows.iter().filter(|(_, p)| !p.is_zero()) {
        w.write_record([
            n.to_string(),
            p.numer().to_string(),
            p.denom().to_string(),
            rational_decimal(p),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `n,probability` or `n,p_num,p_den,p_decimal` into a distribution.
/// Errors name the offending line.
pub fn read_histogram(path: &Path) -> Result<WealthDistribution> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = r
        .headers()
        .with_context(|| format!("{}: unreadable header", path.display()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let n_col = col("n").with_context(|| format!("{}:1: missing column `n`", path.display()))?;
    let p_col = col("probability")
        .or_else(|| col("p_decimal"))
        .with_context(|| format!("{}:1: missing column `probability`", path.display()))?;

    let mut pairs: Vec<(i64, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let n: i64 = rec
            .get(n_col)
            .and_then(|s| s.parse().ok())
            .with_context(|| format!("{}:{line}: bad wealth value", path.display()))?;
        let p: f64 = rec
            .get(p_col)
            .and_then(|s| s.parse().ok())
            .filter(|x: &f64| x.is_finite())
            .with_context(|| format!("{}:{line}: bad probability", path.display()))?;
        if pairs.iter().any(|(m, _)| *m == n) {
            bail!("{}:{line}: duplicate row for n = {n}", path.display());
        }
        pairs.push((n, p));
    }
    if pairs.is_empty() {
        return WealthDistribution::zeros(0, 0).map_err(Into::into);
    }
    Ok(WealthDistribution::from_pairs(&pairs)?)
}

/// `out.csv` -> `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Sibling file sharing the output's stem: `out.csv` -> `out.<suffix>`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: &'static str,
    pub generator: Option<&'static str>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
    pub derived: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("exlab-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn histogram_round_trip() {
        let p = WealthDistribution::from_pairs(&[(-2, 0.25), (0, 0.5), (3, 0.25)]).unwrap();
        let path = tmp("h.csv");
        write_histogram(&path, &p).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "n,probability\n-2,0.25\n0,0.5\n3,0.25\n");
        let q = read_histogram(&path).unwrap();
        assert_eq!(q.get(-2), 0.25);
        assert_eq!(q.get(3), 0.25);
    }

    #[test]
    fn bad_row_names_line() {
        let path = tmp("bad.csv");
        std::fs::write(&path, "n,probability\n0,0.5\n1,abc\n").unwrap();
        let err = read_histogram(&path).unwrap_err();
        assert!(format!("{err:#}").contains(":3:"), "{err:#}");
    }

    #[test]
    fn manifest_naming() {
        assert_eq!(manifest_path(Path::new("a/out.csv")), Path::new("a/out.manifest.json"));
        assert_eq!(sibling(Path::new("out.csv"), "summary.csv"), Path::new("out.summary.csv"));
    }
}
