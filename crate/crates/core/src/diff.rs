//! Unified-diff parsing into per-hunk added/removed line lists, the carrier
//! for code-change context when scoring fix commits.

use serde::{Deserialize, Serialize};

/// One `@@` hunk of a unified diff.
///
/// `added` carries new-file line numbers, `removed` old-file line numbers;
/// both lists are strictly increasing. `file` is the post-image path (the
/// pre-image path for deletions).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffHunk {
    pub file: String,
    pub added: Vec<(u32, String)>,
    pub removed: Vec<(u32, String)>,
}

fn strip_diff_prefix(path: &str) -> &str {
    path.strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path)
}

/// Parse `git diff` output into hunks. Unrecognized lines (mode changes,
/// binary notices, "no newline" markers) are skipped; an empty or
/// non-diff input yields no hunks.
pub fn parse_unified_diff(diff: &str) -> Vec<DiffHunk> {
    let mut hunks = Vec::new();
    let mut old_path: Option<String> = None;
    let mut new_path: Option<String> = None;
    let mut current: Option<(DiffHunk, u32, u32)> = None; // hunk, next old line, next new line

    let flush = |cur: &mut Option<(DiffHunk, u32, u32)>, hunks: &mut Vec<DiffHunk>| {
        if let Some((hunk, _, _)) = cur.take() {
            hunks.push(hunk);
        }
    };

    for line in diff.lines() {
        if line.starts_with("diff --git ") {
            flush(&mut current, &mut hunks);
            old_path = None;
            new_path = None;
        } else if let Some(rest) = line.strip_prefix("--- ") {
            flush(&mut current, &mut hunks);
            let p = rest.split('\t').next().unwrap_or(rest);
            old_path = (p != "/dev/null").then(|| strip_diff_prefix(p).to_string());
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            let p = rest.split('\t').next().unwrap_or(rest);
            new_path = (p != "/dev/null").then(|| strip_diff_prefix(p).to_string());
        } else if let Some(header) = line.strip_prefix("@@ ") {
            flush(&mut current, &mut hunks);
            if let Some((old_start, new_start)) = parse_hunk_header(header) {
                let file = match (&new_path, &old_path) {
                    (Some(p), _) => p.clone(),
                    (None, Some(p)) => p.clone(),
                    (None, None) => continue,
                };
                current = Some((
                    DiffHunk { file, added: Vec::new(), removed: Vec::new() },
                    old_start,
                    new_start,
                ));
            }
        } else if let Some((hunk, old_no, new_no)) = current.as_mut() {
            if let Some(text) = line.strip_prefix('+') {
                hunk.added.push((*new_no, text.to_string()));
                *new_no += 1;
            } else if let Some(text) = line.strip_prefix('-') {
                hunk.removed.push((*old_no, text.to_string()));
                *old_no += 1;
            } else if let Some(_ctx) = line.strip_prefix(' ') {
                *old_no += 1;
                *new_no += 1;
            } else if line.is_empty() {
                // Some diffs drop the leading space on blank context lines.
                *old_no += 1;
                *new_no += 1;
            }
            // "\ No newline at end of file" and anything else: skip.
        }
    }
    flush(&mut current, &mut hunks);
    hunks
}

/// Extract (old_start, new_start) from `-l,s +l,s @@ ...`.
fn parse_hunk_header(header: &str) -> Option<(u32, u32)> {
    let mut parts = header.split_whitespace();
    let old = parts.next()?.strip_prefix('-')?;
    let new = parts.next()?.strip_prefix('+')?;
    let start = |spec: &str| -> Option<u32> {
        spec.split(',').next()?.parse().ok()
    };
    Some((start(old)?, start(new)?))
}
