//! Weak labeling of actionable warnings: a semantic score from the fix
//! commit's message, a structural score from its code change, and the
//! aggregate VTB/LTB/UTB class with the AWHB flag.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::DiffHunk;
use crate::warning::{parse_qualifier, QualifierSlots, WarningRecord, WarningType};

/// Common fix-related keywords (the lowest keyword tier).
pub const COMMON_KEYWORDS: [&str; 15] = [
    "fix", "repair", "bug", "warning", "solve", "problem", "handle", "eliminate", "address",
    "issue", "fail", "error", "exception", "patch", "crash",
];

/// Warning-type keywords per category (the highest keyword tier).
pub fn warning_type_keywords(wtype: WarningType) -> &'static [&'static str] {
    match wtype {
        WarningType::UninitializedVariable => &["initial", "define", "assign", "declare"],
        WarningType::NullDereference => {
            &["dereference", "null pointer", "null check", "NullPointerException"]
        }
        WarningType::ResourceLeak => &[
            "resource", "leak", "release", "cleanup", "alloc", "clear", "close", "free",
            "destroy", "terminate", "end",
        ],
        WarningType::DeadStore => &["dead store", "unused", "redundant"],
        WarningType::BufferOverflow => &["buffer", "overflow"],
    }
}

/// Fallback proximity radius when the warned procedure's span is unknown.
pub const SCOPE_FALLBACK_RADIUS: u32 = 50;

/// Inclusive line range limiting how far from the warning a change may be
/// and still count as in scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: u32,
    pub end: u32,
}

impl LineSpan {
    pub fn contains(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }

    /// Default window: the warning line padded by [`SCOPE_FALLBACK_RADIUS`].
    pub fn around(line: u32) -> Self {
        LineSpan {
            start: line.saturating_sub(SCOPE_FALLBACK_RADIUS).max(1),
            end: line.saturating_add(SCOPE_FALLBACK_RADIUS),
        }
    }
}

/// Aggregate weak-label class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AggregateClass {
    UTB,
    LTB,
    VTB,
}

impl std::fmt::Display for AggregateClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AggregateClass::UTB => "UTB",
            AggregateClass::LTB => "LTB",
            AggregateClass::VTB => "VTB",
        };
        f.write_str(s)
    }
}

/// Weak label for one actionable warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakLabel {
    /// Semantic (commit message) score, 0..=3.
    pub cm: u8,
    /// Structural (code change) score, 0..=2.
    pub cc: u8,
    pub aggregate: AggregateClass,
    pub awhb: bool,
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("score out of range: cm={cm} cc={cc} (cm must be 0..=3, cc 0..=2)")]
    ScoreOutOfRange { cm: u8, cc: u8 },
}

/// Combine the two scores: sum > 3 is VTB, 2..=3 is LTB, below 2 is UTB;
/// AWHB covers VTB and LTB.
pub fn aggregate(cm: u8, cc: u8) -> Result<WeakLabel, LabelError> {
    if cm > 3 || cc > 2 {
        return Err(LabelError::ScoreOutOfRange { cm, cc });
    }
    let sum = cm + cc;
    let aggregate = if sum > 3 {
        AggregateClass::VTB
    } else if sum >= 2 {
        AggregateClass::LTB
    } else {
        AggregateClass::UTB
    };
    Ok(WeakLabel {
        cm,
        cc,
        aggregate,
        awhb: matches!(aggregate, AggregateClass::VTB | AggregateClass::LTB),
    })
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Whole-word, case-sensitive containment check.
fn contains_word(haystack: &str, word: &str) -> bool {
    if word.is_empty() {
        return false;
    }
    let bytes = haystack.as_bytes();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(word) {
        let start = from + pos;
        let end = start + word.len();
        let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
        if left_ok && right_ok {
            return true;
        }
        from = start + 1;
    }
    false
}

/// Semantic matching score of a fix-commit message against the keyword tiers:
/// 3 for a warning-type keyword, 2 for a qualifier identifier, 1 for a common
/// fix keyword, 0 otherwise; the maximum of all matched tiers wins.
///
/// Keyword tiers match as case-insensitive substrings ("leak" must trigger on
/// "leakage"); qualifier identifiers match as case-sensitive whole words so
/// short names like `fd` do not fire inside ordinary prose.
pub fn semantic_score(wtype: WarningType, slots: &QualifierSlots, message: &str) -> u8 {
    let lower = message.to_lowercase();
    if warning_type_keywords(wtype)
        .iter()
        .any(|kw| lower.contains(&kw.to_lowercase()))
    {
        return 3;
    }
    if slots.identifiers().iter().any(|id| contains_word(message, id)) {
        return 2;
    }
    if COMMON_KEYWORDS.iter().any(|kw| lower.contains(kw)) {
        return 1;
    }
    0
}

/// Structural matching score of a fix-commit code change: 2 when the change
/// matches the warning type's fix pattern, 1 when it merely falls in the
/// expected scope, 0 otherwise.
pub fn structural_score(
    wtype: WarningType,
    slots: &QualifierSlots,
    warning: &WarningRecord,
    hunks: &[DiffHunk],
) -> u8 {
    structural_score_in_window(wtype, slots, warning, hunks, LineSpan::around(warning.line))
}

/// [`structural_score`] with an explicit proximity window (normally the
/// warned procedure's span when the post-image source is available).
pub fn structural_score_in_window(
    wtype: WarningType,
    slots: &QualifierSlots,
    warning: &WarningRecord,
    hunks: &[DiffHunk],
    window: LineSpan,
) -> u8 {
    if detect_fix_pattern(wtype, slots, warning, hunks) {
        2
    } else if in_scope_within(wtype, warning, hunks, window) {
        1
    } else {
        0
    }
}

/// Direction of the expected fix location relative to the warning line.
fn fix_is_before_warning(wtype: WarningType) -> bool {
    matches!(
        wtype,
        WarningType::UninitializedVariable
            | WarningType::NullDereference
            | WarningType::BufferOverflow
    )
}

fn in_direction(wtype: WarningType, changed_line: u32, warning_line: u32) -> bool {
    if fix_is_before_warning(wtype) {
        changed_line <= warning_line
    } else {
        changed_line >= warning_line
    }
}

/// True when some changed line lies in the warning's file on the expected
/// side of the warning, using the fallback proximity window.
pub fn in_scope(wtype: WarningType, warning: &WarningRecord, hunks: &[DiffHunk]) -> bool {
    in_scope_within(wtype, warning, hunks, LineSpan::around(warning.line))
}

/// [`in_scope`] with an explicit proximity window.
pub fn in_scope_within(
    wtype: WarningType,
    warning: &WarningRecord,
    hunks: &[DiffHunk],
    window: LineSpan,
) -> bool {
    hunks
        .iter()
        .filter(|h| h.file == warning.file)
        .flat_map(|h| {
            h.added
                .iter()
                .map(|(n, _)| *n)
                .chain(h.removed.iter().map(|(n, _)| *n))
        })
        .any(|line| in_direction(wtype, line, warning.line) && window.contains(line))
}

/// Names whose appearance in a callee marks a resource-releasing call.
const RELEASE_HINTS: [&str; 8] = [
    "free", "close", "release", "destroy", "cleanup", "clear", "terminate", "end",
];

/// Unsafe-to-bounded replacement pairs for buffer-overflow fixes.
fn bounded_counterparts(function: &str) -> &'static [&'static str] {
    match function {
        "strcpy" => &["strncpy", "strlcpy"],
        "sprintf" => &["snprintf"],
        "strcat" => &["strncat"],
        "gets" => &["fgets"],
        _ => &[],
    }
}

/// Lexical detection of the per-type fix patterns over the diff, restricted
/// to the warning's file and the type's expected side of the warning line.
///
/// The detectors are line-local pattern matches, not AST differencing: an
/// added assignment or address-of argument for uninitialized variables, an
/// added null-check conditional for null dereferences, an added call to a
/// release-style function taking the leaked variable for resource leaks, an
/// added use or a removed store for dead stores, and a bounded-counterpart
/// replacement or added bounds check for buffer overflows.
pub fn detect_fix_pattern(
    wtype: WarningType,
    slots: &QualifierSlots,
    warning: &WarningRecord,
    hunks: &[DiffHunk],
) -> bool {
    let added: Vec<(u32, &str)> = changed_lines(hunks, warning, true);
    let removed: Vec<(u32, &str)> = changed_lines(hunks, warning, false);
    let in_dir = |line: u32| in_direction(wtype, line, warning.line);

    match wtype {
        WarningType::UninitializedVariable => {
            let Some(var) = slots.variable.as_deref() else { return false };
            added
                .iter()
                .any(|(n, text)| in_dir(*n) && (assigns_to(text, var) || passes_by_reference(text, var)))
        }
        WarningType::NullDereference => {
            let Some(ptr) = slots.pointer.as_deref() else { return false };
            added.iter().any(|(n, text)| in_dir(*n) && is_null_check(text, ptr))
        }
        WarningType::ResourceLeak => {
            let Some(var) = slots.variable.as_deref() else { return false };
            added.iter().any(|(n, text)| {
                in_dir(*n)
                    && calls_in(text).iter().any(|(callee, args)| {
                        let lc = callee.to_lowercase();
                        RELEASE_HINTS.iter().any(|h| lc.contains(h)) && contains_word(args, var)
                    })
            })
        }
        WarningType::DeadStore => {
            let Some(var) = slots.variable.as_deref() else { return false };
            let used_later = added
                .iter()
                .any(|(n, text)| in_dir(*n) && has_non_assignment_use(text, var));
            let store_removed = removed.iter().any(|(n, _)| *n == warning.line);
            used_later || store_removed
        }
        WarningType::BufferOverflow => {
            let Some(func) = slots.function.as_deref() else { return false };
            let counterparts = bounded_counterparts(func);
            let removed_unsafe_call = removed
                .iter()
                .any(|(n, text)| in_dir(*n) && calls_in(text).iter().any(|(c, _)| c == func));
            // The replacement call lands wherever renumbering puts it, so the
            // location test anchors on the removed call alone.
            let added_bounded_call = added.iter().any(|(_, text)| {
                calls_in(text)
                    .iter()
                    .any(|(c, _)| counterparts.contains(&c.as_str()))
            });
            let added_bounds_check = added
                .iter()
                .any(|(n, text)| in_dir(*n) && is_bounds_check(text));
            (removed_unsafe_call && added_bounded_call) || added_bounds_check
        }
    }
}

fn changed_lines<'a>(
    hunks: &'a [DiffHunk],
    warning: &WarningRecord,
    added: bool,
) -> Vec<(u32, &'a str)> {
    hunks
        .iter()
        .filter(|h| h.file == warning.file)
        .flat_map(|h| if added { h.added.iter() } else { h.removed.iter() })
        .map(|(n, text)| (*n, text.as_str()))
        .collect()
}

/// `var = expr` (plain assignment, including initialized declarations).
fn assigns_to(line: &str, var: &str) -> bool {
    let bytes = line.as_bytes();
    let mut from = 0;
    while let Some(pos) = line[from..].find(var) {
        let start = from + pos;
        let end = start + var.len();
        let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
        if left_ok && right_ok {
            let rest = line[end..].trim_start();
            if rest.starts_with('=') && !rest.starts_with("==") {
                return true;
            }
        }
        from = start + 1;
    }
    false
}

/// `f(&var)` — the variable's address passed into some call.
fn passes_by_reference(line: &str, var: &str) -> bool {
    calls_in(line).iter().any(|(_, args)| {
        let mut from = 0;
        while let Some(pos) = args[from..].find('&') {
            let after = args[from + pos + 1..].trim_start();
            if let Some(rest) = after.strip_prefix(var) {
                if rest.is_empty() || !is_word_byte(rest.as_bytes()[0]) {
                    return true;
                }
            }
            from += pos + 1;
        }
        false
    })
}

/// An occurrence of `var` that is not the left side of a plain assignment.
fn has_non_assignment_use(line: &str, var: &str) -> bool {
    let bytes = line.as_bytes();
    let mut from = 0;
    while let Some(pos) = line[from..].find(var) {
        let start = from + pos;
        let end = start + var.len();
        let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
        if left_ok && right_ok {
            let rest = line[end..].trim_start();
            let is_plain_assign = rest.starts_with('=') && !rest.starts_with("==");
            if !is_plain_assign {
                return true;
            }
        }
        from = start + 1;
    }
    false
}

/// Extract `(callee, argument text)` pairs for every call on the line.
fn calls_in(line: &str) -> Vec<(String, String)> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if is_word_byte(bytes[i]) && !bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && is_word_byte(bytes[i]) {
                i += 1;
            }
            let name = &line[start..i];
            let mut j = i;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'(' {
                let (args, end) = balanced_parens(line, j);
                out.push((name.to_string(), args));
                i = end;
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Text between the paren at `open` and its match (or end of line).
fn balanced_parens(line: &str, open: usize) -> (String, usize) {
    let bytes = line.as_bytes();
    let mut depth = 0;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return (line[open + 1..i].to_string(), i + 1);
                }
            }
            _ => {}
        }
    }
    (line[open + 1..].to_string(), bytes.len())
}

/// Condition text of the first `if`/`while` guard on the line, if any.
fn guard_condition(line: &str) -> Option<String> {
    for kw in ["if", "while"] {
        let mut from = 0;
        while let Some(pos) = line[from..].find(kw) {
            let start = from + pos;
            let end = start + kw.len();
            let bytes = line.as_bytes();
            let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
            let right_ok = end < bytes.len() && !is_word_byte(bytes[end]);
            if left_ok && right_ok {
                if let Some(open_rel) = line[end..].find('(') {
                    let between = &line[end..end + open_rel];
                    if between.trim().is_empty() {
                        let (cond, _) = balanced_parens(line, end + open_rel);
                        return Some(cond);
                    }
                }
            }
            from = start + 1;
        }
    }
    None
}

const NULLISH: [&str; 3] = ["NULL", "nullptr", "0"];

/// An added `if`/`while` guard testing `ptr` against null or emptiness.
fn is_null_check(line: &str, ptr: &str) -> bool {
    let Some(cond) = guard_condition(line) else { return false };
    if !contains_word(&cond, ptr) {
        return false;
    }
    if cond.trim() == ptr {
        return true; // if (p)
    }
    // if (!p), possibly through parentheses: "!(p" / "! p"
    let negated = {
        let mut found = false;
        let mut from = 0;
        while let Some(pos) = cond[from..].find(ptr) {
            let start = from + pos;
            let before = cond[..start].trim_end();
            let before = before.trim_end_matches('(').trim_end();
            if before.ends_with('!') && !before.ends_with("!=") {
                found = true;
                break;
            }
            from = start + 1;
        }
        found
    };
    if negated {
        return true;
    }
    // p == NULL / p != NULL / NULL == p / NULL != p (also nullptr, 0)
    let esc = regex::escape(ptr);
    let null_alt = NULLISH.join("|");
    let re = regex::Regex::new(&format!(
        r"(?:\b{esc}\s*[!=]=\s*(?:{null_alt})\b)|(?:\b(?:{null_alt})\s*[!=]=\s*{esc}\b)"
    ))
    .expect("null-check pattern compiles");
    re.is_match(&cond)
}

/// An added `if`/`while` guard comparing against a length or size.
fn is_bounds_check(line: &str) -> bool {
    let Some(cond) = guard_condition(line) else { return false };
    let has_relation = ["<=", ">=", "<", ">"].iter().any(|op| cond.contains(op));
    if !has_relation {
        return false;
    }
    let lc = cond.to_lowercase();
    ["sizeof", "strlen", "strnlen", "len", "size", "count", "bound", "limit"]
        .iter()
        .any(|tok| lc.contains(tok))
}

/// Full labeling pass for one actionable warning: parse the qualifier,
/// score the commit message and the diff, and aggregate.
pub fn weak_label(
    warning: &WarningRecord,
    message: &str,
    hunks: &[DiffHunk],
    window: Option<LineSpan>,
) -> WeakLabel {
    let slots = parse_qualifier(warning.wtype, &warning.qualifier);
    let cm = semantic_score(warning.wtype, &slots, message);
    let cc = structural_score_in_window(
        warning.wtype,
        &slots,
        warning,
        hunks,
        window.unwrap_or_else(|| LineSpan::around(warning.line)),
    );
    aggregate(cm, cc).expect("scores are in range by construction")
}
