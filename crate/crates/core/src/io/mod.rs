//! File formats: prediction CSVs, binary model files, flat `key = value`
//! configuration files and labeled feature tables.

mod config;
mod model;
mod predictions;
mod table;

use thiserror::Error;

pub use config::{parse_dataset_spec, parse_train_config, read_train_config, write_dataset_spec, write_train_config};
pub use model::{decode_model, encode_model, load_ensemble, read_model, save_ensemble, write_model, MODEL_MAGIC};
pub use predictions::{format_predictions, parse_predictions, read_predictions, write_predictions, PredictionRecord};
pub use table::{format_dataset, format_uq_table, parse_dataset, parse_uq_table, read_dataset, read_uq_table, write_dataset, write_uq_table, UqRow};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: malformed header, expected `{expected}`, found `{found}`")]
    MalformedHeader { line: usize, expected: String, found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: instance {instance} has {got} members, expected {expected}")]
    InconsistentMembers { line: usize, instance: u64, expected: usize, got: usize },
    #[error("line {line}: {got} classes, expected {expected}")]
    InconsistentClasses { line: usize, expected: usize, got: usize },
    #[error("line {line}: {source}")]
    Simplex { line: usize, source: crate::simplex::SimplexError },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("offset {offset}: {message}")]
    Corrupt { offset: usize, message: String },
    #[error("file is empty")]
    Empty,
}

impl FormatError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        FormatError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse { line, message: message.into() }
    }
}

pub(crate) fn parse_f64(field: &str, line: usize) -> Result<f64, FormatError> {
    field.trim().parse::<f64>().map_err(|_| FormatError::parse(line, format!("`{field}` is not a number")))
}

pub(crate) fn parse_int<T: std::str::FromStr>(field: &str, line: usize) -> Result<T, FormatError> {
    field.trim().parse::<T>().map_err(|_| FormatError::parse(line, format!("`{field}` is not a valid integer")))
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}
