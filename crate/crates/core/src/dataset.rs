//! Versioned JSONL artifact schemas shared across pipeline stages. Every
//! artifact starts with a one-line schema header; warning identities are
//! derived, so records travel as their eight declared fields.

use std::io::{BufRead, Write};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureBundle;
use crate::miner::{ActionableWarning, SurvivingWarning};
use crate::reranker::ClassLabel;
use crate::warning::WarningRecord;

pub const ACTIONABLE_SCHEMA: &str = "warntriage/actionable";
pub const FALSE_WARNINGS_SCHEMA: &str = "warntriage/false-warnings";
pub const DATASET_SCHEMA: &str = "warntriage/dataset";
pub const RANKED_SCHEMA: &str = "warntriage/ranked";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("artifact io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("expected schema {expected:?} v{expected_version}, found {found:?} v{found_version}")]
    WrongSchema {
        expected: String,
        expected_version: u32,
        found: String,
        found_version: u32,
    },
    #[error("artifact is empty (missing schema header)")]
    MissingHeader,
    #[error("invalid entry at line {line}: {message}")]
    InvalidEntry { line: usize, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaHeader {
    schema: String,
    version: u32,
}

/// One labeled dataset row: the warning, its class, the weak scores, the
/// fix commit when one exists, and the encoder inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub warning: WarningRecord,
    pub label: ClassLabel,
    pub cm: u8,
    pub cc: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fix_commit: Option<String>,
    pub bundle: FeatureBundle,
}

impl DatasetEntry {
    /// Enforce the row invariants: actionable labels must agree with the
    /// aggregation of (cm, cc); false warnings carry zero scores and no fix
    /// commit.
    pub fn validate(&self) -> Result<(), String> {
        match self.label {
            ClassLabel::FalseWarning => {
                if self.cm != 0 || self.cc != 0 {
                    return Err(format!(
                        "false warning has nonzero scores cm={} cc={}",
                        self.cm, self.cc
                    ));
                }
                if self.fix_commit.is_some() {
                    return Err("false warning has a fix commit".to_string());
                }
            }
            actionable => {
                let agg = crate::labeler::aggregate(self.cm, self.cc)
                    .map_err(|e| e.to_string())?;
                let expected: ClassLabel = agg.aggregate.into();
                if expected != actionable {
                    return Err(format!(
                        "label {actionable} inconsistent with cm={} cc={} (expected {expected})",
                        self.cm, self.cc
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn is_awhb(&self) -> bool {
        self.label.is_awhb()
    }
}

/// Row of `actionable.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionableRow {
    pub warning: WarningRecord,
    pub last_present: String,
    pub fix_commit: String,
}

impl From<ActionableWarning> for ActionableRow {
    fn from(a: ActionableWarning) -> Self {
        ActionableRow { warning: a.warning, last_present: a.last_present, fix_commit: a.fix_commit }
    }
}

/// Row of `false_warnings.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalseWarningRow {
    pub warning: WarningRecord,
    pub first_seen: i64,
    pub head: String,
}

impl From<SurvivingWarning> for FalseWarningRow {
    fn from(s: SurvivingWarning) -> Self {
        FalseWarningRow { warning: s.warning, first_seen: s.first_seen, head: s.head }
    }
}

/// Row of `ranked.jsonl`, highest score first in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    /// Identity digest, hex-encoded (JSON numbers cannot carry u64 exactly).
    pub identity: String,
    pub score: f64,
    pub predicted: ClassLabel,
    pub confidence: f64,
    pub file: String,
    pub line: u32,
    pub wtype: crate::warning::WarningType,
}

/// Write a schema header plus one JSON object per line.
pub fn write_jsonl<T: Serialize>(
    mut out: impl Write,
    schema: &str,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), SchemaError> {
    let header = SchemaHeader { schema: schema.to_string(), version: SCHEMA_VERSION };
    serde_json::to_writer(&mut out, &header).map_err(|e| SchemaError::Parse { line: 1, source: e })?;
    out.write_all(b"\n")?;
    for row in rows {
        serde_json::to_writer(&mut out, &row).map_err(|e| SchemaError::Parse { line: 0, source: e })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a schema-headed JSONL artifact.
pub fn read_jsonl<T: DeserializeOwned>(
    input: impl BufRead,
    schema: &str,
) -> Result<Vec<T>, SchemaError> {
    let mut rows = Vec::new();
    let mut lines = input.lines().enumerate();
    let Some((_, header_line)) = lines.next() else {
        return Err(SchemaError::MissingHeader);
    };
    let header_line = header_line?;
    let header: SchemaHeader = serde_json::from_str(&header_line)
        .map_err(|e| SchemaError::Parse { line: 1, source: e })?;
    if header.schema != schema || header.version != SCHEMA_VERSION {
        return Err(SchemaError::WrongSchema {
            expected: schema.to_string(),
            expected_version: SCHEMA_VERSION,
            found: header.schema,
            found_version: header.version,
        });
    }
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: T = serde_json::from_str(&line)
            .map_err(|e| SchemaError::Parse { line: idx + 1, source: e })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn identity_hex(identity: u64) -> String {
    format!("{identity:016x}")
}
