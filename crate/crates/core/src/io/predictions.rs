use std::fmt::Write as _;
use std::path::Path;

use super::{parse_f64, parse_int, read_text, write_text, FormatError};
use crate::simplex::{MemberSet, ProbVector};

/// One instance of a prediction file: id, label (`-1` if unknown) and the
/// member predictions in member order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub instance_id: u64,
    pub label: i64,
    pub members: MemberSet,
}

fn header(classes: usize) -> String {
    let mut h = String::from("instance_id,label,member");
    for k in 0..classes {
        let _ = write!(h, ",p_{k}");
    }
    h
}

/// Serializes records as `instance_id,label,member,p_0,...,p_{C-1}`, one row per
/// (instance, member), floats in shortest round-trip form.
pub fn format_predictions(records: &[PredictionRecord]) -> String {
    let classes = records.first().map_or(2, |r| r.members.classes());
    let mut out = header(classes);
    out.push('\n');
    for r in records {
        for (m, p) in r.members.iter().enumerate() {
            let _ = write!(out, "{},{},{}", r.instance_id, r.label, m);
            for x in p.iter() {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
    }
    out
}

/// Parses a prediction file. Rows of one instance must be consecutive with
/// member indices `0..M`; every instance must share `M` and `C`.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or(FormatError::Empty)?;
    let fields: Vec<&str> = first.split(',').map(str::trim).collect();
    let classes = fields.len().saturating_sub(3);
    if classes < 2 || first.trim() != header(classes) {
        return Err(FormatError::MalformedHeader { line: 1, expected: header(classes.max(2)), found: first.to_string() });
    }

    let mut records: Vec<PredictionRecord> = Vec::new();
    let mut pending: Option<(u64, i64, Vec<ProbVector>, usize)> = None;
    let mut members_per_instance: Option<usize> = None;

    let mut flush = |pending: Option<(u64, i64, Vec<ProbVector>, usize)>, records: &mut Vec<PredictionRecord>| -> Result<(), FormatError> {
        if let Some((id, label, rows, line)) = pending {
            let expected = *members_per_instance.get_or_insert(rows.len());
            if rows.len() != expected {
                return Err(FormatError::InconsistentMembers { line, instance: id, expected, got: rows.len() });
            }
            let members = MemberSet::new(rows).map_err(|source| FormatError::Simplex { line, source })?;
            records.push(PredictionRecord { instance_id: id, label, members });
        }
        Ok(())
    };

    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != classes + 3 {
            return Err(FormatError::InconsistentClasses { line, expected: classes, got: fields.len().saturating_sub(3) });
        }
        let id: u64 = parse_int(fields[0], line)?;
        let label: i64 = parse_int(fields[1], line)?;
        let member: usize = parse_int(fields[2], line)?;
        if label < -1 {
            return Err(FormatError::parse(line, format!("label {label} is below -1")));
        }
        if label >= classes as i64 {
            return Err(FormatError::parse(line, format!("label {label} is not below {classes}")));
        }
        let probs = fields[3..].iter().map(|f| parse_f64(f, line)).collect::<Result<Vec<_>, _>>()?;
        let p = ProbVector::new(probs).map_err(|source| FormatError::Simplex { line, source })?;

        let continues = matches!(&pending, Some((pid, ..)) if *pid == id);
        if !continues {
            flush(pending.take(), &mut records)?;
            if records.iter().any(|r| r.instance_id == id) {
                return Err(FormatError::parse(line, format!("rows of instance {id} are not consecutive")));
            }
            pending = Some((id, label, Vec::new(), line));
        }
        let (_, plabel, rows, _) = pending.as_mut().unwrap();
        if *plabel != label {
            return Err(FormatError::parse(line, format!("instance {id} changes label from {plabel} to {label}")));
        }
        if member != rows.len() {
            return Err(FormatError::parse(line, format!("expected member {} of instance {id}, found {member}", rows.len())));
        }
        rows.push(p);
    }
    flush(pending.take(), &mut records)?;
    Ok(records)
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), FormatError> {
    write_text(path, &format_predictions(records))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, FormatError> {
    parse_predictions(&read_text(path)?)
}
