// SPDX-License-Identifier: Apache-2.0

//! CSV ingestion and output.
//!
//! Input files have a header row and either the columns `t,y` (one sample
//! per file, labelled by the file stem) or `t,y,sample` (long format, one
//! sample per distinct label in order of first appearance).

use std::io::{Read, Write};
use std::path::Path;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::sim::PowerRow;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Map each sample's design points affinely onto `[0, 1]` before
    /// validation.
    pub rescale: bool,
}

fn parse_field(record: &csv::StringRecord, col: usize, line: usize) -> Result<f64> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse::<f64>()
        .map_err(|_| Error::Csv(format!("line {line}: cannot parse '{raw}' as a number")))
}

fn rescale(points: &mut [(f64, f64)]) -> Result<()> {
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::InvalidParameter(
            "cannot rescale a sample with a single design point".into(),
        ));
    }
    for p in points.iter_mut() {
        p.0 = (p.0 - lo) / (hi - lo);
    }
    Ok(())
}

/// Reads every sample in `reader`; `default_label` names a two-column file.
pub fn read_samples(
    reader: impl Read,
    default_label: &str,
    options: ReadOptions,
) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (tc, yc) = match (find("t"), find("y")) {
        (Some(t), Some(y)) => (t, y),
        _ => return Err(Error::Csv("header must contain columns 't' and 'y'".into())),
    };
    let sc = find("sample");

    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let point = (parse_field(&record, tc, line)?, parse_field(&record, yc, line)?);
        let label = match sc {
            Some(c) => record.get(c).unwrap_or("").to_string(),
            None => default_label.to_string(),
        };
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push(point),
            None => groups.push((label, vec![point])),
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    groups
        .into_iter()
        .map(|(label, mut pts)| {
            if options.rescale {
                rescale(&mut pts)?;
            }
            Sample::new(label, &pts)
        })
        .collect()
}

pub fn read_samples_file(path: &Path, options: ReadOptions) -> Result<Vec<Sample>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".into());
    read_samples(file, &label, options)
}

/// Writes `t,y` rows.
pub fn write_columns(writer: impl Write, header: [&str; 2], t: &[f64], y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for (a, b) in t.iter().zip(y) {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sample(writer: impl Write, sample: &Sample) -> Result<()> {
    write_columns(writer, ["t", "y"], sample.t(), sample.y())
}

/// Fit values as `t,fit`.
pub fn write_fit(writer: impl Write, t: &[f64], values: &[f64]) -> Result<()> {
    write_columns(writer, ["t", "fit"], t, values)
}

/// Power table as `g_id,eta,method,power,se`.
pub fn write_power(writer: impl Write, rows: &[PowerRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["g_id", "eta", "method", "power", "se"])?;
    for r in rows {
        w.write_record([
            r.g.clone(),
            r.eta.to_string(),
            r.method.to_string(),
            r.power.to_string(),
            r.se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
