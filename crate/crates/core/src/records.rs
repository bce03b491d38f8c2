//! Line-oriented record formats for streaming input and output.
//!
//! Input records are one per line, either JSON objects
//! (`{"id": "...", "vec": [...], "label": "..."}`, `id` and `label` optional)
//! or headerless CSV (`id,label,v1,...,vN`, empty `id`/`label` fields allowed).
//! Blank lines and lines starting with `#` are comments in both formats.

use crate::clusterer::Action;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (expected jsonl or csv)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("invalid JSON record: {0}")]
    Json(String),
    #[error("invalid CSV record: {0}")]
    Csv(String),
    #[error("CSV record needs id, label and at least two components, got {0} fields")]
    TooFewFields(usize),
    #[error("component {index} is not a number: {text:?}")]
    BadNumber { index: usize, text: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub id: Option<String>,
    pub vector: Vec<f64>,
    pub label: Option<String>,
}

/// A string or bare number; both are accepted for `id` and `label`.
#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Text(String),
    Int(i64),
    Float(f64),
}

impl From<Scalar> for String {
    fn from(s: Scalar) -> Self {
        match s {
            Scalar::Text(t) => t,
            Scalar::Int(i) => i.to_string(),
            Scalar::Float(f) => f.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    #[serde(default)]
    id: Option<Scalar>,
    vec: Vec<f64>,
    #[serde(default)]
    label: Option<Scalar>,
}

/// True for lines that carry no record.
pub fn is_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

pub fn parse_record(line: &str, format: Format) -> Result<StreamRecord, RecordError> {
    match format {
        Format::Jsonl => {
            let rec: JsonRecord =
                serde_json::from_str(line).map_err(|e| RecordError::Json(e.to_string()))?;
            Ok(StreamRecord {
                id: rec.id.map(String::from),
                vector: rec.vec,
                label: rec.label.map(String::from),
            })
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_reader(line.as_bytes());
            let row = match reader.records().next() {
                Some(r) => r.map_err(|e| RecordError::Csv(e.to_string()))?,
                None => return Err(RecordError::TooFewFields(0)),
            };
            if row.len() < 4 {
                return Err(RecordError::TooFewFields(row.len()));
            }
            let text = |i: usize| {
                let f = row[i].trim();
                (!f.is_empty()).then(|| f.to_string())
            };
            let vector = (2..row.len())
                .map(|i| {
                    row[i]
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| RecordError::BadNumber {
                            index: i - 2,
                            text: row[i].to_string(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(StreamRecord {
                id: text(0),
                vector,
                label: text(1),
            })
        }
    }
}

/// Writes one input-format record; numbers use shortest round-trip form.
pub fn write_record<W: Write + ?Sized>(
    out: &mut W,
    format: Format,
    record: &StreamRecord,
) -> io::Result<()> {
    match format {
        Format::Jsonl => {
            #[derive(Serialize)]
            struct Out<'a> {
                #[serde(skip_serializing_if = "Option::is_none")]
                id: Option<&'a str>,
                vec: &'a [f64],
                #[serde(skip_serializing_if = "Option::is_none")]
                label: Option<&'a str>,
            }
            let line = serde_json::to_string(&Out {
                id: record.id.as_deref(),
                vec: &record.vector,
                label: record.label.as_deref(),
            })
            .map_err(io::Error::other)?;
            writeln!(out, "{line}")
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            let mut fields = vec![
                record.id.clone().unwrap_or_default(),
                record.label.clone().unwrap_or_default(),
            ];
            fields.extend(record.vector.iter().map(|v| v.to_string()));
            w.write_record(&fields).map_err(io::Error::other)?;
            let bytes = w
                .into_inner()
                .map_err(|e| io::Error::other(e.to_string()))?;
            out.write_all(&bytes)
        }
    }
}

/// One emitted assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub id: String,
    pub cluster: u64,
    pub action: Action,
}

pub fn write_output<W: Write + ?Sized>(
    out: &mut W,
    format: Format,
    record: &OutputRecord,
) -> io::Result<()> {
    match format {
        Format::Jsonl => {
            let line = serde_json::to_string(record).map_err(io::Error::other)?;
            writeln!(out, "{line}")
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            w.write_record([
                record.id.as_str(),
                &record.cluster.to_string(),
                record.action.as_str(),
            ])
            .map_err(io::Error::other)?;
            let bytes = w
                .into_inner()
                .map_err(|e| io::Error::other(e.to_string()))?;
            out.write_all(&bytes)
        }
    }
}
