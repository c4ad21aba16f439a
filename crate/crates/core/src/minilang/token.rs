//! Tokens and the canonical token joiner.

use serde::{Deserialize, Serialize};

/// Marker text for structural tokens. Newline keeps its literal text;
/// indent/dedent get printable markers so token streams stay joinable.
pub const NEWLINE_TEXT: &str = "\n";
pub const INDENT_TEXT: &str = "<ind>";
pub const DEDENT_TEXT: &str = "<ded>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Ident,
    Int,
    Op,
    Delim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset into the source the token came from.
    pub offset: usize,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>, offset: usize) -> Self {
        Self {
            kind,
            text: text.into(),
            offset,
        }
    }

    pub fn is_newline(&self) -> bool {
        self.kind == TokenKind::Delim && self.text == NEWLINE_TEXT
    }

    pub fn is_indent(&self) -> bool {
        self.kind == TokenKind::Delim && self.text == INDENT_TEXT
    }

    pub fn is_dedent(&self) -> bool {
        self.kind == TokenKind::Delim && self.text == DEDENT_TEXT
    }
}

/// Joins tokens back into canonical source: tokens separated by single
/// spaces, one statement per line, blocks indented by four spaces.
///
/// Total on arbitrary token streams (including degraded ones): indentation
/// depth is clamped at zero and unterminated lines are flushed at the end.
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut depth: usize = 0;
    let mut line: Vec<&str> = Vec::new();
    for tok in tokens {
        if tok.is_newline() {
            flush_line(&mut out, depth, &line);
            line.clear();
        } else if tok.is_indent() {
            depth += 1;
        } else if tok.is_dedent() {
            depth = depth.saturating_sub(1);
        } else {
            line.push(&tok.text);
        }
    }
    if !line.is_empty() {
        flush_line(&mut out, depth, &line);
    }
    out
}

fn flush_line(out: &mut String, depth: usize, line: &[&str]) {
    if line.is_empty() {
        return; // canonical form has no blank lines
    }
    for _ in 0..depth {
        out.push_str("    ");
    }
    out.push_str(&line.join(" "));
    out.push('\n');
}
