//! Indentation-aware lexer.

use thiserror::Error;

use super::token::{Token, TokenKind, DEDENT_TEXT, INDENT_TEXT, NEWLINE_TEXT};

pub const KEYWORDS: &[&str] = &[
    "def", "return", "for", "in", "range", "while", "if", "else", "print", "len", "append",
    "read_int",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexError {
    #[error("illegal character {ch:?} at offset {offset}")]
    IllegalChar { ch: char, offset: usize },
    #[error("indentation must be a multiple of four spaces at offset {offset}")]
    RaggedIndent { offset: usize },
    #[error("over-indented line at offset {offset}")]
    OverIndent { offset: usize },
}

/// Lexes source text. Newlines separate statements; leading four-space
/// groups become indent/dedent tokens. Blank lines produce nothing, so
/// joining the tokens with [`super::token::render_tokens`] yields the
/// canonical source form.
pub fn lex(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let mut depth: usize = 0;
    let mut offset = 0;
    for raw_line in source.split('\n') {
        let line_start = offset;
        offset += raw_line.len() + 1; // '\n' accounted even on the last line
        let has_newline = line_start + raw_line.len() < source.len();

        if raw_line.trim().is_empty() {
            continue;
        }
        let spaces = raw_line.len() - raw_line.trim_start_matches(' ').len();
        if raw_line.as_bytes()[spaces] == b'\t' {
            return Err(LexError::IllegalChar {
                ch: '\t',
                offset: line_start + spaces,
            });
        }
        if spaces % 4 != 0 {
            return Err(LexError::RaggedIndent { offset: line_start });
        }
        let new_depth = spaces / 4;
        if new_depth > depth + 1 {
            return Err(LexError::OverIndent { offset: line_start });
        }
        while new_depth > depth {
            tokens.push(Token::new(TokenKind::Delim, INDENT_TEXT, line_start));
            depth += 1;
        }
        while new_depth < depth {
            tokens.push(Token::new(TokenKind::Delim, DEDENT_TEXT, line_start));
            depth -= 1;
        }

        lex_line(raw_line, line_start, spaces, &mut tokens)?;
        if has_newline {
            tokens.push(Token::new(
                TokenKind::Delim,
                NEWLINE_TEXT,
                line_start + raw_line.len(),
            ));
        }
    }
    Ok(tokens)
}

fn lex_line(
    line: &str,
    line_start: usize,
    from: usize,
    tokens: &mut Vec<Token>,
) -> Result<(), LexError> {
    let bytes = line.as_bytes();
    let mut i = from;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let at = line_start + i;
        match c {
            ' ' => i += 1,
            '\t' => return Err(LexError::IllegalChar { ch: '\t', offset: at }),
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                tokens.push(Token::new(TokenKind::Int, &line[start..i], at));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let text = &line[start..i];
                let kind = if KEYWORDS.contains(&text) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Ident
                };
                tokens.push(Token::new(kind, text, at));
            }
            '=' | '!' | '<' | '>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    tokens.push(Token::new(TokenKind::Op, &line[i..i + 2], at));
                    i += 2;
                } else if c == '!' {
                    return Err(LexError::IllegalChar { ch: '!', offset: at });
                } else {
                    tokens.push(Token::new(TokenKind::Op, &line[i..i + 1], at));
                    i += 1;
                }
            }
            '+' | '-' | '*' | '/' | '%' => {
                tokens.push(Token::new(TokenKind::Op, &line[i..i + 1], at));
                i += 1;
            }
            '(' | ')' | '[' | ']' | '{' | '}' | ',' | ':' => {
                tokens.push(Token::new(TokenKind::Delim, &line[i..i + 1], at));
                i += 1;
            }
            other => return Err(LexError::IllegalChar { ch: other, offset: at }),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::token::render_tokens;

    #[test]
    fn simple_assignment_tokens() {
        let toks = lex("x = 1").unwrap();
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["x", "=", "1"]);
        assert_eq!(toks[0].kind, TokenKind::Ident);
        assert_eq!(toks[1].kind, TokenKind::Op);
        assert_eq!(toks[2].kind, TokenKind::Int);
    }

    #[test]
    fn empty_program_lexes_to_nothing() {
        assert_eq!(lex("").unwrap(), vec![]);
        assert_eq!(lex("\n\n  \n").unwrap(), vec![]);
    }

    #[test]
    fn for_header_has_ten_tokens() {
        // for | i | in | range | ( | 0 | , | 10 | ) | :
        let toks = lex("for i in range(0,10):").unwrap();
        assert_eq!(toks.len(), 10);
        assert_eq!(toks.last().unwrap().text, ":");
        assert_eq!(toks[0].kind, TokenKind::Keyword);
        assert_eq!(toks[3].kind, TokenKind::Keyword); // range is reserved
    }

    #[test]
    fn illegal_character_is_reported_with_offset() {
        match lex("x = 1 # comment").unwrap_err() {
            LexError::IllegalChar { ch, offset } => {
                assert_eq!(ch, '#');
                assert_eq!(offset, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn indentation_becomes_structural_tokens() {
        let src = "while x < 3:\n    x = x + 1\nprint(x)";
        let toks = lex(src).unwrap();
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert!(texts.contains(&INDENT_TEXT));
        assert!(texts.contains(&DEDENT_TEXT));
        // Joining reaches a canonical fixpoint after one pass.
        let canon = render_tokens(&toks);
        assert_eq!(render_tokens(&lex(&canon).unwrap()), canon);
    }

    #[test]
    fn ragged_indent_rejected() {
        assert!(matches!(
            lex("if x:\n   y = 1").unwrap_err(),
            LexError::RaggedIndent { .. }
        ));
    }
}
