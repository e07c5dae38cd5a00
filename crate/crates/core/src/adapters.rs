//! Parsers for the native report formats of Infer (`report.json`) and
//! Flawfinder (`--csv`), filtered down to the five in-scope warning types.
//!
//! Adapters only parse; running the analyzers is the miner's tool-runner
//! concern. New tools plug in through [`AdapterRegistry`] without touching
//! the core types.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::warning::{Tool, WarningRecord, WarningType};

/// Minimum Flawfinder risk level kept, per the priority-4 setting.
pub const FLAWFINDER_MIN_LEVEL: u32 = 4;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("unknown tool: {0}")]
    UnknownTool(String),
}

fn malformed(msg: impl Into<String>) -> AdapterError {
    AdapterError::MalformedReport(msg.into())
}

#[derive(Deserialize)]
struct InferEntry {
    bug_type: String,
    #[serde(default)]
    qualifier: Option<String>,
    #[serde(default)]
    file: Option<String>,
    #[serde(default)]
    procedure: Option<String>,
    #[serde(default)]
    line: Option<i64>,
    #[serde(default)]
    column: Option<i64>,
}

fn map_infer_bug_type(bug_type: &str) -> Option<WarningType> {
    match bug_type {
        // Infer has renamed the uninitialized check across versions.
        "UNINITIALIZED_VALUE" | "UNINITIALIZED_VARIABLE" => {
            Some(WarningType::UninitializedVariable)
        }
        "NULL_DEREFERENCE" => Some(WarningType::NullDereference),
        "RESOURCE_LEAK" | "MEMORY_LEAK" => Some(WarningType::ResourceLeak),
        "DEAD_STORE" => Some(WarningType::DeadStore),
        _ => None,
    }
}

/// Parse an Infer `report.json` payload (a JSON array of issue objects).
///
/// Entries whose `bug_type` does not map to an in-scope warning type are
/// dropped silently; retained entries missing a required field make the whole
/// report malformed. Infer reports carry no source context, so
/// `context_code` is left empty until a source tree is available (see
/// [`WarningRecord::with_context_code`]).
pub fn parse_infer_report(payload: &[u8]) -> Result<Vec<WarningRecord>, AdapterError> {
    let entries: Vec<serde_json::Value> = serde_json::from_slice(payload)
        .map_err(|e| malformed(format!("invalid Infer JSON: {e}")))?;
    let mut out = Vec::new();
    for (idx, value) in entries.into_iter().enumerate() {
        let entry: InferEntry = serde_json::from_value(value)
            .map_err(|e| malformed(format!("entry {idx}: {e}")))?;
        let Some(wtype) = map_infer_bug_type(&entry.bug_type) else {
            continue;
        };
        let file = entry
            .file
            .filter(|f| !f.is_empty())
            .ok_or_else(|| malformed(format!("entry {idx}: missing file")))?;
        let line = entry
            .line
            .ok_or_else(|| malformed(format!("entry {idx}: missing line")))?;
        if line < 1 {
            return Err(malformed(format!("entry {idx}: line {line} < 1")));
        }
        let qualifier = entry
            .qualifier
            .ok_or_else(|| malformed(format!("entry {idx}: missing qualifier")))?;
        // Infer writes column -1 when unknown.
        let column = entry.column.and_then(|c| u32::try_from(c).ok()).filter(|&c| c >= 1);
        out.push(WarningRecord::new(
            Tool::Infer,
            wtype,
            file,
            line as u32,
            column,
            entry.procedure.unwrap_or_default(),
            qualifier,
            "",
        ));
    }
    Ok(out)
}

/// Parse Flawfinder CSV output, keeping the default priority-4 threshold.
pub fn parse_flawfinder_report(payload: &[u8]) -> Result<Vec<WarningRecord>, AdapterError> {
    parse_flawfinder_report_with_level(payload, FLAWFINDER_MIN_LEVEL)
}

/// Parse Flawfinder CSV output, keeping rows at or above `min_level` whose
/// category or warning text indicates a buffer overflow.
///
/// The header must contain at least `File`, `Line`, `Column`, `Level`,
/// `Category`, `Warning`, and `Context`; extra columns are ignored.
pub fn parse_flawfinder_report_with_level(
    payload: &[u8],
    min_level: u32,
) -> Result<Vec<WarningRecord>, AdapterError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(payload);
    let headers = reader
        .headers()
        .map_err(|e| malformed(format!("invalid Flawfinder CSV: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize, AdapterError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| malformed(format!("missing Flawfinder column {name}")))
    };
    let c_file = col("File")?;
    let c_line = col("Line")?;
    let c_column = col("Column")?;
    let c_level = col("Level")?;
    let c_category = col("Category")?;
    let c_warning = col("Warning")?;
    let c_context = col("Context")?;

    let mut out = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| malformed(format!("row {idx}: {e}")))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let level: u32 = field(c_level)
            .trim()
            .parse()
            .map_err(|_| malformed(format!("row {idx}: bad Level {:?}", field(c_level))))?;
        if level < min_level {
            continue;
        }
        let category = field(c_category).to_ascii_lowercase();
        let warning = field(c_warning).to_ascii_lowercase();
        if !category.contains("buffer") && !warning.contains("buffer overflow") {
            continue;
        }
        let file = field(c_file).to_string();
        if file.is_empty() {
            return Err(malformed(format!("row {idx}: empty File")));
        }
        let line: u32 = field(c_line)
            .trim()
            .parse()
            .map_err(|_| malformed(format!("row {idx}: bad Line {:?}", field(c_line))))?;
        if line < 1 {
            return Err(malformed(format!("row {idx}: Line < 1")));
        }
        let column = field(c_column).trim().parse::<u32>().ok().filter(|&c| c >= 1);
        out.push(WarningRecord::new(
            Tool::Flawfinder,
            WarningType::BufferOverflow,
            file,
            line,
            column,
            // Flawfinder does not report the enclosing procedure.
            "",
            field(c_warning),
            field(c_context).trim(),
        ));
    }
    Ok(out)
}

type ParseFn = fn(&[u8]) -> Result<Vec<WarningRecord>, AdapterError>;

/// Registry of report parsers keyed by tool name, so additional tools can be
/// added without core changes.
pub struct AdapterRegistry {
    parsers: BTreeMap<String, ParseFn>,
}

impl Default for AdapterRegistry {
    fn default() -> Self {
        let mut reg = AdapterRegistry { parsers: BTreeMap::new() };
        reg.register("infer", parse_infer_report);
        reg.register("flawfinder", parse_flawfinder_report);
        reg
    }
}

impl AdapterRegistry {
    pub fn register(&mut self, tool: &str, parser: ParseFn) {
        self.parsers.insert(tool.to_string(), parser);
    }

    pub fn parse(&self, tool: &str, payload: &[u8]) -> Result<Vec<WarningRecord>, AdapterError> {
        let parser = self
            .parsers
            .get(tool)
            .ok_or_else(|| AdapterError::UnknownTool(tool.to_string()))?;
        parser(payload)
    }

    pub fn tools(&self) -> impl Iterator<Item = &str> {
        self.parsers.keys().map(String::as_str)
    }
}
