//! Persisting cell reports.
//!
//! CSV columns, in order:
//!
//! ```text
//! problem,method,d,n,sigma,eta,alpha,B,level,trials,seed,coverage,coverage_se,mean_length,length_se,wall_time_s
//! ```
//!
//! `B` is empty for methods without a replicate count, `alpha` is the decay
//! exponent actually used, and reals are written with 17 significant digits so
//! they parse back bit for bit. JSON output is an array of the same records,
//! each carrying `"schema_version": 1`.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use crate::cell::ExperimentReport;

pub const CSV_HEADER: [&str; 16] = [
    "problem",
    "method",
    "d",
    "n",
    "sigma",
    "eta",
    "alpha",
    "B",
    "level",
    "trials",
    "seed",
    "coverage",
    "coverage_se",
    "mean_length",
    "length_se",
    "wall_time_s",
];

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => bail!("unknown format `{other}` (csv or json)"),
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

/// One flattened output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub problem: String,
    pub method: String,
    pub d: usize,
    pub n: usize,
    pub sigma: String,
    pub eta: f64,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub replicates: Option<usize>,
    pub level: f64,
    pub trials: usize,
    pub seed: u64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_length: f64,
    pub length_se: f64,
    pub wall_time_s: f64,
}

impl From<&ExperimentReport> for ReportRecord {
    fn from(r: &ExperimentReport) -> Self {
        let c = &r.config;
        ReportRecord {
            problem: c.problem.to_string(),
            method: c.method.name().to_string(),
            d: c.d,
            n: c.n,
            sigma: c.sigma.name().to_string(),
            eta: c.eta,
            alpha: c.effective_alpha(),
            replicates: c.method.replicates(),
            level: c.level,
            trials: c.trials,
            seed: c.seed,
            coverage: r.coverage_mean,
            coverage_se: r.coverage_se,
            mean_length: r.mean_length,
            length_se: r.length_se,
            wall_time_s: r.wall_time_s,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VersionedRecord {
    schema_version: u32,
    #[serde(flatten)]
    record: ReportRecord,
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[ReportRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.problem.clone(),
            r.method.clone(),
            r.d.to_string(),
            r.n.to_string(),
            r.sigma.clone(),
            real(r.eta),
            real(r.alpha),
            r.replicates.map(|b| b.to_string()).unwrap_or_default(),
            real(r.level),
            r.trials.to_string(),
            r.seed.to_string(),
            real(r.coverage),
            real(r.coverage_se),
            real(r.mean_length),
            real(r.length_se),
            real(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    ensure!(header == CSV_HEADER, "unexpected CSV header {header:?}");
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_json<W: Write>(records: &[ReportRecord], out: W) -> Result<()> {
    let versioned: Vec<_> = records
        .iter()
        .map(|r| VersionedRecord {
            schema_version: SCHEMA_VERSION,
            record: r.clone(),
        })
        .collect();
    serde_json::to_writer_pretty(out, &versioned)?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<ReportRecord>> {
    let versioned: Vec<VersionedRecord> = serde_json::from_reader(input)?;
    versioned
        .into_iter()
        .map(|v| {
            ensure!(
                v.schema_version == SCHEMA_VERSION,
                "unsupported schema_version {}",
                v.schema_version
            );
            Ok(v.record)
        })
        .collect()
}

/// Writes one record per report to `path`.
pub fn emit_report(reports: &[ExperimentReport], format: Format, path: &Path) -> Result<()> {
    let records: Vec<ReportRecord> = reports.iter().map(ReportRecord::from).collect();
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(&records, &mut out),
        Format::Json => write_json(&records, &mut out),
    }
    .and_then(|_| out.flush().map_err(Into::into))
    .with_context(|| format!("writing {}", path.display()))
}

pub fn parse_report(path: &Path, format: Format) -> Result<Vec<ReportRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let input = BufReader::new(file);
    match format {
        Format::Csv => read_csv(input),
        Format::Json => read_json(input),
    }
    .with_context(|| format!("parsing {}", path.display()))
}
