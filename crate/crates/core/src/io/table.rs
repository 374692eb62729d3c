//! Labeled feature tables (`label,x_0,...`) and per-instance uncertainty
//! tables (`instance_id,label,set,measure,value`).

use std::fmt::Write as _;
use std::path::Path;

use super::{parse_f64, parse_int, read_text, write_text, FormatError};
use crate::data::Dataset;

fn table_header(dim: usize) -> String {
    let mut h = String::from("label");
    for i in 0..dim {
        let _ = write!(h, ",x_{i}");
    }
    h
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut out = table_header(data.dim());
    out.push('\n');
    for (i, row) in data.rows().enumerate() {
        let _ = write!(out, "{}", data.label(i));
        for x in row {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<Dataset, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or(FormatError::Empty)?;
    let dim = first.split(',').count().saturating_sub(1);
    if dim == 0 || first.trim() != table_header(dim) {
        return Err(FormatError::MalformedHeader { line: 1, expected: table_header(dim.max(1)), found: first.to_string() });
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(FormatError::parse(line, format!("expected {} fields, found {}", dim + 1, fields.len())));
        }
        labels.push(parse_int::<i64>(fields[0], line)?);
        for f in &fields[1..] {
            let x = parse_f64(f, line)?;
            if !x.is_finite() {
                return Err(FormatError::parse(line, "non-finite feature"));
            }
            features.push(x);
        }
    }
    Dataset::new(dim, features, labels).map_err(|e| FormatError::InvalidConfig(e.to_string()))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), FormatError> {
    write_text(path, &format_dataset(data))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, FormatError> {
    parse_dataset(&read_text(path)?)
}

/// One row of an uncertainty table.
#[derive(Debug, Clone, PartialEq)]
pub struct UqRow {
    pub instance_id: u64,
    pub label: i64,
    pub set: String,
    pub measure: String,
    pub value: f64,
}

const UQ_HEADER: &str = "instance_id,label,set,measure,value";

pub fn format_uq_table(rows: &[UqRow]) -> String {
    let mut out = format!("{UQ_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.instance_id, r.label, r.set, r.measure, r.value);
    }
    out
}

pub fn parse_uq_table(text: &str) -> Result<Vec<UqRow>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or(FormatError::Empty)?;
    if first.trim() != UQ_HEADER {
        return Err(FormatError::MalformedHeader { line: 1, expected: UQ_HEADER.into(), found: first.to_string() });
    }
    let mut rows = Vec::new();
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 5 {
            return Err(FormatError::parse(line, format!("expected 5 fields, found {}", f.len())));
        }
        rows.push(UqRow {
            instance_id: parse_int(f[0], line)?,
            label: parse_int(f[1], line)?,
            set: f[2].trim().to_string(),
            measure: f[3].trim().to_string(),
            value: parse_f64(f[4], line)?,
        });
    }
    Ok(rows)
}

pub fn write_uq_table(path: &Path, rows: &[UqRow]) -> Result<(), FormatError> {
    write_text(path, &format_uq_table(rows))
}

pub fn read_uq_table(path: &Path) -> Result<Vec<UqRow>, FormatError> {
    parse_uq_table(&read_text(path)?)
}
