//! Canonical warning representation shared by every other module: the five
//! in-scope warning types, the warning record with its identity digest, and
//! qualifier-slot parsing.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Static-analysis tool that produced a warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tool {
    Infer,
    Flawfinder,
}

impl Tool {
    pub fn name(self) -> &'static str {
        match self {
            Tool::Infer => "infer",
            Tool::Flawfinder => "flawfinder",
        }
    }
}

/// The five warning categories kept by the pipeline. Anything else is
/// rejected at the adapter level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WarningType {
    UninitializedVariable,
    NullDereference,
    ResourceLeak,
    DeadStore,
    BufferOverflow,
}

pub const ALL_WARNING_TYPES: [WarningType; 5] = [
    WarningType::UninitializedVariable,
    WarningType::NullDereference,
    WarningType::ResourceLeak,
    WarningType::DeadStore,
    WarningType::BufferOverflow,
];

impl WarningType {
    /// Stable token hashed into the identity digest. Never change these.
    pub fn token(self) -> &'static str {
        match self {
            WarningType::UninitializedVariable => "UNINITIALIZED_VARIABLE",
            WarningType::NullDereference => "NULL_DEREFERENCE",
            WarningType::ResourceLeak => "RESOURCE_LEAK",
            WarningType::DeadStore => "DEAD_STORE",
            WarningType::BufferOverflow => "BUFFER_OVERFLOW",
        }
    }

    /// Human-readable label, used as the bug-type text feature.
    pub fn label(self) -> &'static str {
        match self {
            WarningType::UninitializedVariable => "Uninitialized Variable",
            WarningType::NullDereference => "Null Dereference",
            WarningType::ResourceLeak => "Resource Leak",
            WarningType::DeadStore => "Dead Store",
            WarningType::BufferOverflow => "Buffer Overflow",
        }
    }
}

/// One deduplicatable static-analysis warning.
///
/// `identity` is derived from `(wtype, file, procedure, context_code)` and is
/// therefore not serialized; deserialization recomputes it. This keeps the
/// wire format at exactly the eight declared fields (`tool`, `wtype`, `file`,
/// `line`, `column`, `procedure`, `qualifier`, `context_code`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WarningRecord {
    pub tool: Tool,
    pub wtype: WarningType,
    /// Repo-relative path; never empty.
    pub file: String,
    /// 1-based line of the warning.
    pub line: u32,
    pub column: Option<u32>,
    /// Enclosing procedure if the tool reports one; may be empty.
    pub procedure: String,
    /// Tool-reported message text.
    pub qualifier: String,
    /// Source line at the warning location, whitespace-trimmed.
    pub context_code: String,
    #[serde(skip)]
    pub identity: u64,
}

impl<'de> Deserialize<'de> for WarningRecord {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            tool: Tool,
            wtype: WarningType,
            file: String,
            line: u32,
            column: Option<u32>,
            procedure: String,
            qualifier: String,
            context_code: String,
        }
        let w = Wire::deserialize(de)?;
        if w.file.is_empty() {
            return Err(serde::de::Error::custom("warning record has empty file"));
        }
        if w.line == 0 {
            return Err(serde::de::Error::custom("warning record has line 0"));
        }
        Ok(WarningRecord::new(
            w.tool,
            w.wtype,
            w.file,
            w.line,
            w.column,
            w.procedure,
            w.qualifier,
            w.context_code,
        ))
    }
}

impl WarningRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tool: Tool,
        wtype: WarningType,
        file: impl Into<String>,
        line: u32,
        column: Option<u32>,
        procedure: impl Into<String>,
        qualifier: impl Into<String>,
        context_code: impl Into<String>,
    ) -> Self {
        let file = file.into();
        let procedure = procedure.into();
        let context_code = context_code.into();
        assert!(!file.is_empty(), "warning file must be non-empty");
        assert!(line >= 1, "warning line must be >= 1");
        let identity = compute_identity(wtype, &file, &procedure, &context_code);
        WarningRecord {
            tool,
            wtype,
            file,
            line,
            column,
            procedure,
            qualifier: qualifier.into(),
            context_code,
            identity,
        }
    }

    /// Replace the context code (e.g. once the checked-out source is
    /// available) and recompute the identity digest.
    pub fn with_context_code(mut self, context_code: impl Into<String>) -> Self {
        self.context_code = context_code.into();
        self.identity =
            compute_identity(self.wtype, &self.file, &self.procedure, &self.context_code);
        self
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const FIELD_SEP: u8 = 0x1f;

fn fnv1a_extend(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// 64-bit identity digest of a warning: FNV-1a over the UTF-8 bytes of the
/// four identity fields joined by the unit separator (0x1f). Fixed forever;
/// replay data and golden tests depend on it being bit-stable across
/// platforms and runs.
pub fn compute_identity(wtype: WarningType, file: &str, procedure: &str, context_code: &str) -> u64 {
    let mut h = FNV_OFFSET;
    h = fnv1a_extend(h, wtype.token().as_bytes());
    h = fnv1a_extend(h, &[FIELD_SEP]);
    h = fnv1a_extend(h, file.as_bytes());
    h = fnv1a_extend(h, &[FIELD_SEP]);
    h = fnv1a_extend(h, procedure.as_bytes());
    h = fnv1a_extend(h, &[FIELD_SEP]);
    h = fnv1a_extend(h, context_code.as_bytes());
    h
}

/// Remove duplicate warnings, preserving first-occurrence order.
///
/// Two passes: identical identity digests collapse to the first occurrence,
/// then cross-tool duplicates at the same `(file, line)` collapse to the
/// Infer record (Infer carries the richer qualifier and the procedure name
/// needed downstream).
pub fn dedup(records: &[WarningRecord]) -> Vec<WarningRecord> {
    let mut seen = HashSet::new();
    let by_identity: Vec<&WarningRecord> = records
        .iter()
        .filter(|r| seen.insert(r.identity))
        .collect();

    // Locations reported by more than one tool.
    let mut infer_locations: HashSet<(&str, u32)> = HashSet::new();
    for r in &by_identity {
        if r.tool == Tool::Infer {
            infer_locations.insert((r.file.as_str(), r.line));
        }
    }
    by_identity
        .into_iter()
        .filter(|r| {
            r.tool == Tool::Infer || !infer_locations.contains(&(r.file.as_str(), r.line))
        })
        .cloned()
        .collect()
}

/// Identifiers and line numbers extracted from a warning qualifier.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualifierSlots {
    pub variable: Option<String>,
    pub pointer: Option<String>,
    pub function: Option<String>,
    pub lines: Vec<u32>,
}

impl QualifierSlots {
    pub fn is_empty(&self) -> bool {
        self.variable.is_none()
            && self.pointer.is_none()
            && self.function.is_none()
            && self.lines.is_empty()
    }

    /// Non-empty slot identifiers, in (variable, pointer, function) order.
    pub fn identifiers(&self) -> Vec<&str> {
        [&self.variable, &self.pointer, &self.function]
            .into_iter()
            .flatten()
            .map(String::as_str)
            .collect()
    }
}

static RE_UNINIT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^The value read from `?([A-Za-z_][A-Za-z0-9_]*)(?:\[[^\]]*\])?`? was never initialized",
    )
    .unwrap()
});
static RE_NULL_DEREF: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:pointer\s+)?`?([A-Za-z_][A-Za-z0-9_]*)`? last assigned on line ([0-9]+) could be null and is dereferenced at line ([0-9]+)",
    )
    .unwrap()
});
static RE_RESOURCE_LEAK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^Resource acquired to `?([A-Za-z_][A-Za-z0-9_]*)`? by call to `?([A-Za-z_][A-Za-z0-9_]*)(?:\(\))?`? at line ([0-9]+) is not released after line ([0-9]+)",
    )
    .unwrap()
});
static RE_DEAD_STORE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^The value written to `?&?([A-Za-z_][A-Za-z0-9_]*)`? is never used").unwrap()
});
static RE_BUFFER_OVERFLOW: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^without a limit specification,?\s+`?([A-Za-z_][A-Za-z0-9_]*)(?:\(\))?`? permits buffer overflows?",
    )
    .unwrap()
});

/// Extract identifier slots from a qualifier using one anchored template per
/// warning type. Unrecognized phrasing yields empty slots, never an error.
pub fn parse_qualifier(wtype: WarningType, qualifier: &str) -> QualifierSlots {
    let mut slots = QualifierSlots::default();
    match wtype {
        WarningType::UninitializedVariable => {
            if let Some(c) = RE_UNINIT.captures(qualifier) {
                slots.variable = Some(c[1].to_string());
            }
        }
        WarningType::NullDereference => {
            if let Some(c) = RE_NULL_DEREF.captures(qualifier) {
                slots.pointer = Some(c[1].to_string());
                slots.lines = parse_lines(&[&c[2], &c[3]]);
            }
        }
        WarningType::ResourceLeak => {
            if let Some(c) = RE_RESOURCE_LEAK.captures(qualifier) {
                slots.variable = Some(c[1].to_string());
                slots.function = Some(c[2].to_string());
                slots.lines = parse_lines(&[&c[3], &c[4]]);
            }
        }
        WarningType::DeadStore => {
            if let Some(c) = RE_DEAD_STORE.captures(qualifier) {
                slots.variable = Some(c[1].to_string());
            }
        }
        WarningType::BufferOverflow => {
            if let Some(c) = RE_BUFFER_OVERFLOW.captures(qualifier) {
                slots.function = Some(c[1].to_string());
            }
        }
    }
    slots
}

fn parse_lines(caps: &[&str]) -> Vec<u32> {
    caps.iter().filter_map(|s| s.parse().ok()).collect()
}
