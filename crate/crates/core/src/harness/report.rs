use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::recon::Method;

pub const REPORT_COLUMNS: [&str; 7] = [
    "method",
    "delta",
    "p",
    "mean_snr_db",
    "success_rate_pct",
    "frames",
    "failures",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub delta: f64,
    /// Mean mask rate over the row's frames.
    pub p: f64,
    pub mean_snr_db: f64,
    pub success_rate_pct: f64,
    pub frames: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::invalid(
                "format",
                format!("unknown report format `{s}`"),
            )),
        }
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.4}")
}

/// Round to the four decimals written to disk.
fn rounded(v: f64) -> f64 {
    fixed(v).parse().unwrap_or(v)
}

impl ReportTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                fixed(r.delta),
                fixed(r.p),
                fixed(r.mean_snr_db),
                fixed(r.success_rate_pct),
                r.frames.to_string(),
                r.failures.to_string(),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<ReportRow> = self
            .rows
            .iter()
            .map(|r| ReportRow {
                delta: rounded(r.delta),
                p: rounded(r.p),
                mean_snr_db: rounded(r.mean_snr_db),
                success_rate_pct: rounded(r.success_rate_pct),
                ..r.clone()
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&ReportTable { rows })?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ReportRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

impl std::fmt::Display for ReportTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<8} {:>8} {:>7} {:>12} {:>9} {:>7} {:>9}",
            "method", "delta", "p", "snr_db", "sr_pct", "frames", "failures"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<8} {:>8.4} {:>7.4} {:>12.4} {:>9.4} {:>7} {:>9}",
                r.method.name(),
                r.delta,
                r.p,
                r.mean_snr_db,
                r.success_rate_pct,
                r.frames,
                r.failures
            )?;
        }
        Ok(())
    }
}

pub fn emit_report(table: &ReportTable, format: ReportFormat, path: &Path) -> Result<()> {
    let text = table.render(format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// First 12 hex digits of the SHA-256 of the config's JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&json))[..12].to_string())
}

/// `<dir>/<stem>-<hash>.<ext>`.
pub fn report_path(dir: &Path, stem: &str, hash: &str, format: ReportFormat) -> PathBuf {
    dir.join(format!("{stem}-{hash}.{}", format.extension()))
}
