//! Lightweight brace-level parser for C source: finds function definitions
//! and the guarding conditional/loop constructs that enclose a given line.
//!
//! This is a grammar-light scanner, not a preprocessor-aware parser: comments
//! and string/char literals are blanked, brace nesting is tracked, and block
//! headers are classified lexically. It never fails; unparseable input just
//! yields fewer constructs.

/// Kind of a braced construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructKind {
    Function,
    If,
    Else,
    For,
    While,
    DoWhile,
    Switch,
}

/// One braced construct with its header text and inclusive line span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Construct {
    pub kind: ConstructKind,
    /// Whitespace-collapsed header text (signature or guard).
    pub header: String,
    /// Function name, for `Function` constructs.
    pub name: Option<String>,
    pub start_line: u32,
    pub end_line: u32,
}

/// Blank comments and string/char literals, preserving newlines so line
/// numbers survive.
fn blank_noise(source: &str) -> String {
    #[derive(PartialEq)]
    enum St {
        Code,
        LineComment,
        BlockComment,
        Str,
        Chr,
    }
    let mut st = St::Code;
    let mut out = String::with_capacity(source.len());
    let mut chars = source.chars().peekable();
    while let Some(c) = chars.next() {
        match st {
            St::Code => match c {
                '/' if chars.peek() == Some(&'/') => {
                    chars.next();
                    out.push_str("  ");
                    st = St::LineComment;
                }
                '/' if chars.peek() == Some(&'*') => {
                    chars.next();
                    out.push_str("  ");
                    st = St::BlockComment;
                }
                '"' => {
                    out.push(' ');
                    st = St::Str;
                }
                '\'' => {
                    out.push(' ');
                    st = St::Chr;
                }
                _ => out.push(c),
            },
            St::LineComment => {
                if c == '\n' {
                    out.push('\n');
                    st = St::Code;
                } else {
                    out.push(' ');
                }
            }
            St::BlockComment => {
                if c == '*' && chars.peek() == Some(&'/') {
                    chars.next();
                    out.push_str("  ");
                    st = St::Code;
                } else if c == '\n' {
                    out.push('\n');
                } else {
                    out.push(' ');
                }
            }
            St::Str | St::Chr => {
                let quote = if st == St::Str { '"' } else { '\'' };
                if c == '\\' {
                    out.push(' ');
                    if let Some(&next) = chars.peek() {
                        chars.next();
                        out.push(if next == '\n' { '\n' } else { ' ' });
                    }
                } else if c == quote {
                    out.push(' ');
                    st = St::Code;
                } else if c == '\n' {
                    // Unterminated literal; recover at end of line.
                    out.push('\n');
                    st = St::Code;
                } else {
                    out.push(' ');
                }
            }
        }
    }
    out
}

/// Blank preprocessor directives (including continuation lines) so they do
/// not bleed into the next block header.
fn blank_preprocessor(clean: &str) -> String {
    let mut out = String::with_capacity(clean.len());
    let mut in_directive = false;
    for line in clean.split_inclusive('\n') {
        let body = line.strip_suffix('\n').unwrap_or(line);
        let directive = in_directive || body.trim_start().starts_with('#');
        in_directive = directive && body.trim_end().ends_with('\\');
        if directive {
            out.extend(std::iter::repeat_n(' ', body.len()));
            if line.ends_with('\n') {
                out.push('\n');
            }
        } else {
            out.push_str(line);
        }
    }
    out
}

fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn first_word(text: &str) -> &str {
    let trimmed = text.trim_start();
    let end = trimmed
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(trimmed.len());
    &trimmed[..end]
}

/// Identifier immediately before the first `(`, for function headers.
fn name_before_paren(header: &str) -> Option<String> {
    let open = header.find('(')?;
    let before = header[..open].trim_end();
    let start = before
        .rfind(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .map(|i| i + 1)
        .unwrap_or(0);
    let name = &before[start..];
    (!name.is_empty() && !name.chars().next().unwrap().is_ascii_digit())
        .then(|| name.to_string())
}

const NON_FUNCTION_LEADS: [&str; 10] = [
    "if", "for", "while", "switch", "do", "else", "struct", "union", "enum", "typedef",
];

fn classify(header: &str, depth: usize) -> Option<(ConstructKind, Option<String>)> {
    let lead = first_word(header);
    match lead {
        "if" => Some((ConstructKind::If, None)),
        "else" => Some((ConstructKind::Else, None)),
        "for" => Some((ConstructKind::For, None)),
        "while" => Some((ConstructKind::While, None)),
        "do" => Some((ConstructKind::DoWhile, None)),
        "switch" => Some((ConstructKind::Switch, None)),
        _ => {
            if depth == 0
                && header.contains('(')
                && !header.contains('=')
                && !NON_FUNCTION_LEADS.contains(&lead)
                && !lead.is_empty()
            {
                let name = name_before_paren(header);
                name.as_ref()?;
                Some((ConstructKind::Function, name))
            } else {
                None
            }
        }
    }
}

/// Scan the source for braced constructs.
pub fn parse_constructs(source: &str) -> Vec<Construct> {
    let clean = blank_preprocessor(&blank_noise(source));
    let mut out: Vec<Construct> = Vec::new();
    // Stack of (index into out, or None for unclassified blocks).
    let mut stack: Vec<Option<usize>> = Vec::new();
    let mut line: u32 = 1;
    let mut fragment = String::new();
    let mut fragment_start = line;
    let mut paren_depth: i32 = 0;

    for c in clean.chars() {
        match c {
            '\n' => {
                line += 1;
                fragment.push(' ');
            }
            '(' => {
                paren_depth += 1;
                fragment.push(c);
            }
            ')' => {
                paren_depth -= 1;
                fragment.push(c);
            }
            ';' if paren_depth <= 0 => {
                fragment.clear();
                fragment_start = line;
            }
            '{' => {
                let header = collapse_ws(&fragment);
                let entry = classify(&header, stack.len()).map(|(kind, name)| {
                    out.push(Construct {
                        kind,
                        header,
                        name,
                        start_line: fragment_start,
                        end_line: line,
                    });
                    out.len() - 1
                });
                stack.push(entry);
                fragment.clear();
                fragment_start = line;
            }
            '}' => {
                if let Some(Some(idx)) = stack.pop() {
                    out[idx].end_line = line;
                }
                fragment.clear();
                fragment_start = line;
            }
            _ => {
                if fragment.trim().is_empty() && !c.is_whitespace() {
                    fragment_start = line;
                }
                fragment.push(c);
            }
        }
    }
    // Unclosed constructs extend to the last line.
    for c in &mut out {
        if c.end_line < c.start_line {
            c.end_line = line;
        }
    }
    for idx in stack.into_iter().flatten() {
        out[idx].end_line = line;
    }
    out
}

/// Constructs whose span contains `line`, outermost first.
pub fn enclosing_stack(constructs: &[Construct], line: u32) -> Vec<&Construct> {
    let mut hits: Vec<&Construct> = constructs
        .iter()
        .filter(|c| c.start_line <= line && line <= c.end_line)
        .collect();
    // Wider spans first; ties broken by earlier start.
    hits.sort_by_key(|c| (c.start_line, std::cmp::Reverse(c.end_line)));
    hits
}

/// Line span of the named function's definition, if present.
pub fn function_span(constructs: &[Construct], name: &str) -> Option<(u32, u32)> {
    constructs
        .iter()
        .find(|c| c.kind == ConstructKind::Function && c.name.as_deref() == Some(name))
        .map(|c| (c.start_line, c.end_line))
}
