//! Encoder inputs for a warning: the four text fields (bug type, qualifier,
//! procedure, filename) and the code context (buggy statement, its enclosing
//! construct header, and the guarding control-flow chain).

use serde::{Deserialize, Serialize};

use crate::csyntax::{self, ConstructKind};
use crate::labeler::LineSpan;
use crate::warning::WarningRecord;

/// Most deeply nested control-flow headers kept, innermost retained.
pub const MAX_FLOW_HEADERS: usize = 8;

/// Text side of the encoder input, in fixed field order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextInput {
    pub bug_type: String,
    pub qualifier: String,
    pub procedure: String,
    pub filename: String,
}

/// Code side of the encoder input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeInput {
    /// Source line at the warning location (falls back to the record's
    /// context code when the source is unavailable).
    pub statement: String,
    /// Header of the innermost enclosing construct; empty at top level.
    pub parent: String,
    /// Guarding headers from the function signature inward, oldest first.
    pub flow: Vec<String>,
}

/// Everything the encoder sees for one warning.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub text: TextInput,
    pub code: CodeInput,
}

/// Extract the four text fields from a warning record.
pub fn text_features(warning: &WarningRecord) -> TextInput {
    TextInput {
        bug_type: warning.wtype.label().to_string(),
        qualifier: warning.qualifier.clone(),
        procedure: warning.procedure.clone(),
        filename: warning.file.clone(),
    }
}

/// Extract the code context from the warned file's content at the warned
/// revision. A missing or unusable source degrades to the record's context
/// code with empty parent and flow; this never fails.
pub fn code_features(warning: &WarningRecord, source: Option<&str>) -> CodeInput {
    let fallback = || CodeInput {
        statement: warning.context_code.clone(),
        parent: String::new(),
        flow: Vec::new(),
    };
    let Some(source) = source else {
        return fallback();
    };
    let Some(statement) = source.lines().nth(warning.line as usize - 1) else {
        return fallback();
    };

    let constructs = csyntax::parse_constructs(source);
    let stack = csyntax::enclosing_stack(&constructs, warning.line);
    let relevant: Vec<&str> = stack
        .iter()
        .filter(|c| {
            matches!(
                c.kind,
                ConstructKind::Function
                    | ConstructKind::If
                    | ConstructKind::Else
                    | ConstructKind::For
                    | ConstructKind::While
                    | ConstructKind::DoWhile
                    | ConstructKind::Switch
            )
        })
        .map(|c| c.header.as_str())
        .collect();
    let keep_from = relevant.len().saturating_sub(MAX_FLOW_HEADERS);
    let flow: Vec<String> = relevant[keep_from..].iter().map(|h| h.to_string()).collect();
    CodeInput {
        statement: statement.trim().to_string(),
        parent: flow.last().cloned().unwrap_or_default(),
        flow,
    }
}

/// Build the full feature bundle for a warning.
pub fn feature_bundle(warning: &WarningRecord, source: Option<&str>) -> FeatureBundle {
    FeatureBundle {
        text: text_features(warning),
        code: code_features(warning, source),
    }
}

/// Line span of the warned procedure in the given source, for the structural
/// scope window. `None` when the procedure is empty or not found.
pub fn procedure_span(source: &str, procedure: &str) -> Option<LineSpan> {
    if procedure.is_empty() {
        return None;
    }
    let constructs = csyntax::parse_constructs(source);
    csyntax::function_span(&constructs, procedure).map(|(start, end)| LineSpan { start, end })
}
