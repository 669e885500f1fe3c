//! CSV and JSON output of reports.
//!
//! JSON documents carry a top-level `schema_version`; CSV files start with a
//! `# volblocks <kind> schema_version=<v>` comment line followed by a header
//! with a fixed column order.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::curves::LossCurves;
use super::empirical::EmpiricalReport;
use super::mc::{McReport, ZStats, COVERAGE_LEVELS};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// A report that flattens to one CSV table.
pub trait Tabular {
    const KIND: &'static str;
    fn columns() -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn z_columns(prefix: &str) -> Vec<String> {
    let mut c = vec![format!("{prefix}_count"), format!("{prefix}_mean"), format!("{prefix}_sd"), format!("{prefix}_rmse")];
    c.extend(COVERAGE_LEVELS.iter().map(|l| format!("{prefix}_cov_{l}")));
    c
}

fn z_values(z: &Option<ZStats>) -> Vec<String> {
    match z {
        Some(z) => {
            let mut v = vec![z.count.to_string(), num(z.mean), num(z.sd), num(z.rmse)];
            v.extend(z.coverage.iter().map(|&c| num(c)));
            v
        }
        None => vec![String::new(); 4 + COVERAGE_LEVELS.len()],
    }
}

impl Tabular for McReport {
    const KIND: &'static str = "mc";

    fn columns() -> Vec<String> {
        let mut c: Vec<String> = ["estimator", "blocks", "n", "xi2", "used", "failed", "nonconverged"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        c.extend(z_columns("z"));
        c.extend(z_columns("zf"));
        c.extend(
            ["empirical_loss", "theoretical_loss", "decomposition_lhs", "decomposition_rhs"]
                .iter()
                .map(|s| s.to_string()),
        );
        c
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                let mut r = vec![
                    c.estimator.to_string(),
                    c.blocks.to_string(),
                    c.n.to_string(),
                    num(c.xi2),
                    c.used.to_string(),
                    c.failed.to_string(),
                    c.nonconverged.to_string(),
                ];
                r.extend(z_values(&c.z));
                r.extend(z_values(&c.z_feasible));
                r.extend([num(c.empirical_loss), num(c.theoretical_loss), num(c.decomposition_lhs), num(c.decomposition_rhs)]);
                r
            })
            .collect()
    }
}

impl Tabular for EmpiricalReport {
    const KIND: &'static str = "empirical";

    fn columns() -> Vec<String> {
        [
            "date",
            "n_returns",
            "flag",
            "estimator",
            "blocks",
            "estimate",
            "avar",
            "ci_low",
            "ci_high",
            "rho_hat_mean",
            "rho_hat_max",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for d in &self.days {
            let head = [d.date.clone().unwrap_or_default(), d.n_returns.to_string(), d.flag.clone().unwrap_or_default()];
            if d.cells.is_empty() {
                let mut r = head.to_vec();
                r.extend(std::iter::repeat(String::new()).take(8));
                out.push(r);
            }
            for c in &d.cells {
                let mut r = head.to_vec();
                r.extend([
                    c.estimator.to_string(),
                    c.blocks.to_string(),
                    num(c.estimate),
                    opt(c.avar),
                    opt(c.ci_low),
                    opt(c.ci_high),
                    opt(c.rho_hat_mean),
                    opt(c.rho_hat_max),
                ]);
                out.push(r);
            }
        }
        out
    }
}

impl Tabular for LossCurves {
    const KIND: &'static str = "avar";

    fn columns() -> Vec<String> {
        ["estimator", "blocks", "rho", "kappa", "tau_frac", "loss"].iter().map(|s| s.to_string()).collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    p.estimator.to_string(),
                    p.blocks.to_string(),
                    num(p.rho),
                    num(p.kappa),
                    num(p.tau_frac),
                    num(p.loss),
                ]
            })
            .collect()
    }
}

/// Writes `report` in `format`.
pub fn emit_to<T: Serialize + Tabular, W: Write>(report: &T, format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "# volblocks {} schema_version={SCHEMA_VERSION}", T::KIND)?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(T::columns())?;
            for r in report.rows() {
                w.write_record(&r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Writes `report` to `path`.
pub fn emit<T: Serialize + Tabular>(report: &T, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    emit_to(report, format, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct Versioned {
    schema_version: String,
}

/// Parses a JSON report, checking its schema version.
pub fn parse_json<T: DeserializeOwned>(input: impl Read) -> Result<T> {
    let v: serde_json::Value = serde_json::from_reader(input)?;
    let ver: Versioned = serde_json::from_value(v.clone())?;
    if ver.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported schema version {}", ver.schema_version)));
    }
    Ok(serde_json::from_value(v)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub kind: String,
    pub schema_version: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Reads a CSV report back into its kind, version, header and rows.
pub fn parse_csv(input: impl Read) -> Result<CsvTable> {
    let mut r = BufReader::new(input);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let bad = || Error::Malformed {
        line: 1,
        msg: "missing '# volblocks <kind> schema_version=<v>' line".into(),
    };
    let mut parts = first.trim().strip_prefix("# volblocks ").ok_or_else(bad)?.split_whitespace();
    let kind = parts.next().ok_or_else(bad)?.to_string();
    let schema_version = parts
        .next()
        .and_then(|p| p.strip_prefix("schema_version="))
        .ok_or_else(bad)?
        .to_string();
    let mut rdr = csv::Reader::from_reader(r);
    let columns = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CsvTable {
        kind,
        schema_version,
        columns,
        rows,
    })
}

impl CsvTable {
    pub fn of<T: Tabular>(report: &T) -> Self {
        CsvTable {
            kind: T::KIND.into(),
            schema_version: SCHEMA_VERSION.into(),
            columns: T::columns(),
            rows: report.rows(),
        }
    }
}
