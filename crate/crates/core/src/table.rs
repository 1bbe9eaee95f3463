//! Row tables written as CSV or JSON.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?} (csv, json)")),
        }
    }
}

/// Header row of `T`, taken from its field names.
fn header<T: Serialize + Default>() -> Result<Vec<u8>, TableError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(T::default())?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    let end = bytes.iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| i + 1);
    Ok(bytes[..end].to_vec())
}

/// Rows as CSV (header first, even when empty) or a JSON array.
pub fn render<T: Serialize + Default>(rows: &[T], format: Format) -> Result<Vec<u8>, TableError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_vec_pretty(rows)?;
            s.push(b'\n');
            Ok(s)
        }
        Format::Csv if rows.is_empty() => header::<T>(),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
    }
}

pub fn emit_report<T: Serialize + Default>(rows: &[T], format: Format, path: &Path) -> Result<(), TableError> {
    let bytes = render(rows, format)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn parse_report<T: DeserializeOwned>(bytes: &[u8], format: Format) -> Result<Vec<T>, TableError> {
    match format {
        Format::Json => Ok(serde_json::from_slice(bytes)?),
        Format::Csv => {
            let mut r = csv::Reader::from_reader(bytes);
            Ok(r.deserialize().collect::<Result<_, _>>()?)
        }
    }
}

pub fn read_report<T: DeserializeOwned>(path: &Path, format: Format) -> Result<Vec<T>, TableError> {
    parse_report(&std::fs::read(path)?, format)
}
