//! CSV ingestion and serialization for populations.
//!
//! Expected file shape: a header row; an id column of non-negative integers;
//! attribute columns coded `{0,1}` (1 = designated group) or as a label pair;
//! score columns as decimal reals; an optional outcome column where an empty
//! cell means "not observed". UTF-8, comma-separated, `.` decimal point.
//! Rows with missing score cells are rejected.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{Candidate, ModelError, Population};

/// How an attribute column encodes group membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeCoding {
    /// `1` = designated group, `0` = complement.
    ZeroOne,
    /// Explicit label pair; any other cell value is an error.
    Labels { group_a: String, other: String },
}

#[derive(Debug, Clone)]
pub struct AttributeColumn {
    pub name: String,
    pub coding: AttributeCoding,
}

impl AttributeColumn {
    pub fn zero_one(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            coding: AttributeCoding::ZeroOne,
        }
    }
}

/// Column mapping for [`load_population`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub id: String,
    pub attributes: Vec<AttributeColumn>,
    pub scores: Vec<String>,
    pub outcome: Option<String>,
}

impl CsvSchema {
    /// `{0,1}`-coded attributes, which is the on-disk convention.
    pub fn zero_one(
        id: impl Into<String>,
        attributes: &[&str],
        scores: &[&str],
        outcome: Option<&str>,
    ) -> Self {
        Self {
            id: id.into(),
            attributes: attributes
                .iter()
                .map(|a| AttributeColumn::zero_one(*a))
                .collect(),
            scores: scores.iter().map(|s| s.to_string()).collect(),
            outcome: outcome.map(|s| s.to_string()),
        }
    }

    /// Reads a header row and maps every column after the id to a score,
    /// except `outcome` and the named attribute columns.
    pub fn infer(header: &[String], attributes: &[&str]) -> Result<Self, ModelError> {
        if header.is_empty() {
            return Err(ModelError::MissingColumn("id".to_string()));
        }
        let id = header[0].clone();
        let mut scores = Vec::new();
        let mut outcome = None;
        for col in &header[1..] {
            if attributes.iter().any(|a| a == col) {
                continue;
            }
            if col == "outcome" {
                outcome = Some(col.clone());
            } else {
                scores.push(col.clone());
            }
        }
        Ok(Self {
            id,
            attributes: attributes
                .iter()
                .map(|a| AttributeColumn::zero_one(*a))
                .collect(),
            scores,
            outcome,
        })
    }
}

fn parse_bool(
    coding: &AttributeCoding,
    raw: &str,
    attr: &str,
    line: u64,
) -> Result<bool, ModelError> {
    match coding {
        AttributeCoding::ZeroOne => match raw.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(ModelError::NonBinaryAttribute {
                line,
                attr: attr.to_string(),
                value: other.to_string(),
            }),
        },
        AttributeCoding::Labels { group_a, other } => {
            let v = raw.trim();
            if v == group_a {
                Ok(true)
            } else if v == other {
                Ok(false)
            } else {
                Err(ModelError::NonBinaryAttribute {
                    line,
                    attr: attr.to_string(),
                    value: v.to_string(),
                })
            }
        }
    }
}

/// Parses a CSV byte stream into a validated [`Population`].
pub fn load_population(source: impl Read, schema: &CsvSchema) -> Result<Population, ModelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let col = |name: &str| -> Result<usize, ModelError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ModelError::MissingColumn(name.to_string()))
    };
    let id_col = col(&schema.id)?;
    let attr_cols: Vec<(usize, &AttributeColumn)> = schema
        .attributes
        .iter()
        .map(|a| Ok((col(&a.name)?, a)))
        .collect::<Result<_, ModelError>>()?;
    let score_cols: Vec<usize> = schema
        .scores
        .iter()
        .map(|s| col(s))
        .collect::<Result<_, ModelError>>()?;
    let outcome_col = schema.outcome.as_ref().map(|o| col(o)).transpose()?;

    let mut candidates = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx as u64 + 2; // 1-based, after the header
        let record = record?;
        let field = |idx: usize| -> Result<&str, ModelError> {
            record.get(idx).ok_or_else(|| ModelError::MalformedRow {
                line,
                msg: format!("missing field at column {idx}"),
            })
        };
        let id: u64 = field(id_col)?
            .trim()
            .parse()
            .map_err(|e| ModelError::MalformedRow {
                line,
                msg: format!("bad id: {e}"),
            })?;
        let mut attrs = BTreeMap::new();
        for (idx, a) in &attr_cols {
            let v = parse_bool(&a.coding, field(*idx)?, &a.name, line)?;
            attrs.insert(a.name.clone(), v);
        }
        let mut scores = Vec::with_capacity(score_cols.len());
        for (idx, name) in score_cols.iter().zip(&schema.scores) {
            let raw = field(*idx)?.trim();
            if raw.is_empty() {
                return Err(ModelError::MalformedRow {
                    line,
                    msg: format!("missing score cell '{name}'"),
                });
            }
            let v: f64 = raw.parse().map_err(|e| ModelError::MalformedRow {
                line,
                msg: format!("bad score '{name}': {e}"),
            })?;
            scores.push(v);
        }
        let outcome = match outcome_col {
            Some(idx) => {
                let raw = field(idx)?.trim();
                if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse().map_err(|e| ModelError::MalformedRow {
                        line,
                        msg: format!("bad outcome: {e}"),
                    })?)
                }
            }
            None => None,
        };
        candidates.push(Candidate {
            id,
            attrs,
            scores,
            outcome,
        });
    }
    Population::new(
        candidates,
        schema.attributes.iter().map(|a| a.name.clone()).collect(),
        schema.scores.clone(),
    )
}

/// Writes a population in the standard CSV layout:
/// `id, <attributes...>, <scores...>[, outcome]`.
///
/// The outcome column is emitted whenever any candidate has an observed
/// outcome; unobserved cells are left empty. Score cells use the shortest
/// round-trip float representation, so load/write/load is lossless.
pub fn write_population(pop: &Population, sink: impl Write) -> Result<(), ModelError> {
    let mut writer = csv::Writer::from_writer(sink);
    let has_outcome = pop.candidates().iter().any(|c| c.outcome.is_some());
    let mut header = vec!["id".to_string()];
    header.extend(pop.attribute_names().iter().cloned());
    header.extend(pop.score_names().iter().cloned());
    if has_outcome {
        header.push("outcome".to_string());
    }
    writer.write_record(&header)?;
    for cand in pop.candidates() {
        let mut row = vec![cand.id.to_string()];
        for attr in pop.attribute_names() {
            row.push(if cand.attrs[attr] { "1" } else { "0" }.to_string());
        }
        for score in &cand.scores {
            row.push(format!("{score}"));
        }
        if has_outcome {
            row.push(cand.outcome.map(|y| format!("{y}")).unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
