//! CSV dataset cache.
//!
//! ```text
//! #cheapboot-dataset v1 kind=linear d=3
//! a1,a2,a3,b
//! 0.12,-1.5,0.33,0.71
//! ```
//!
//! The first line carries the problem kind and dimension, the second is the
//! column header, and each following row holds the features then the
//! response. Values are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;

use super::{Dataset, Observation, ProblemKind};
use crate::{Error, Result, Scalar};

const MAGIC: &str = "#cheapboot-dataset v1";

pub fn write_csv<T: Scalar, W: Write>(data: &Dataset<T>, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{MAGIC} kind={} d={}", data.kind(), data.dim())?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("a{i}")).collect();
    header.push("b".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(data.dim() + 1);
    for o in data.iter() {
        row.clear();
        row.extend(o.features.iter().map(|v| v.to_string()));
        row.push(o.response.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: Scalar, R: Read>(input: R) -> Result<Dataset<T>> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let (kind, dim) = parse_preamble(first.trim_end())?;

    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header_len = r.headers()?.len();
    if header_len != dim + 1 {
        return Err(Error::Format(format!(
            "header has {header_len} columns, expected {}",
            dim + 1
        )));
    }
    let mut obs = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(dim + 1);
        for field in rec.iter() {
            let v: T = field.trim().parse().map_err(|_| {
                Error::Format(format!("row {}: cannot parse `{field}`", line + 1))
            })?;
            vals.push(v);
        }
        if vals.len() != dim + 1 {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                vals.len(),
                dim + 1
            )));
        }
        let b = vals.pop().expect("non-empty row");
        obs.push(Observation::new(DVector::from_vec(vals), b));
    }
    Dataset::new(kind, dim, obs)
}

fn parse_preamble(line: &str) -> Result<(ProblemKind, usize)> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Format(format!("missing `{MAGIC}` preamble")))?;
    let mut kind = None;
    let mut dim = None;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("kind", v)) => kind = Some(v.parse::<ProblemKind>()?),
            Some(("d", v)) => {
                dim = Some(
                    v.parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad dimension `{v}`")))?,
                )
            }
            _ => return Err(Error::Format(format!("unexpected preamble token `{tok}`"))),
        }
    }
    match (kind, dim) {
        (Some(k), Some(d)) => Ok((k, d)),
        _ => Err(Error::Format("preamble must carry kind= and d=".into())),
    }
}

pub fn save<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    write_csv(data, File::create(path)?)
}

pub fn load<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    read_csv(File::open(path)?)
}
