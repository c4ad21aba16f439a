//! Closed word-and-symbol vocabulary shared by natural-language and code
//! sequences, plus role-capped token sequences.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{
    self,
    token::{Token, TokenKind, DEDENT_TEXT, INDENT_TEXT, NEWLINE_TEXT},
};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const SEP: u32 = 3;
pub const UNK: u32 = 4;

/// Markers introducing each of the five NL parts, ids 5..=9.
pub const PART_MARKERS: [&str; 5] = ["<tags>", "<desc>", "<infmt>", "<outfmt>", "<iosamp>"];

const RESERVED: [&str; 10] = [
    "<pad>", "<bos>", "<eos>", "<sep>", "<unk>", "<tags>", "<desc>", "<infmt>", "<outfmt>",
    "<iosamp>",
];

/// Printable stand-ins for the structural code tokens.
pub const CODE_NEWLINE: &str = "<nl>";
pub const CODE_INDENT: &str = "<ind>";
pub const CODE_DEDENT: &str = "<ded>";

#[derive(Debug, Error, PartialEq)]
pub enum VocabError {
    #[error("token id {0} out of range")]
    BadId(u32),
    #[error("code does not lex: {0}")]
    Unlexable(String),
}

/// Bijective symbol table over non-reserved entries; stable across
/// save/load because symbols are stored in id order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds the table over every NL word and code token in the corpus.
    /// Non-reserved symbols are sorted, so the mapping is independent of
    /// sample order.
    pub fn build<'a>(texts: impl Iterator<Item = &'a str>, codes: impl Iterator<Item = &'a str>) -> Self {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for text in texts {
            seen.extend(split_words(text));
        }
        for code in codes {
            if let Ok(tokens) = minilang::lex(code) {
                seen.extend(tokens.iter().map(code_token_text));
            }
        }
        let mut symbols: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        symbols.extend(seen.into_iter().filter(|s| !RESERVED.contains(&s.as_str())));
        Self::from_symbols(symbols)
    }

    pub fn from_symbols(symbols: Vec<String>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Self { symbols, index }
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, text: &str) -> u32 {
        self.index.get(text).copied().unwrap_or(UNK)
    }

    pub fn text(&self, id: u32) -> Result<&str, VocabError> {
        self.symbols
            .get(id as usize)
            .map(String::as_str)
            .ok_or(VocabError::BadId(id))
    }
}

/// Token id sequence with its role cap applied; `truncated` records that
/// the cap clipped the content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub truncated: bool,
}

/// Splits text into words and single-character symbols: alphanumeric and
/// underscore runs stay together, every other non-space character stands
/// alone.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.push(c);
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Word-level tokenization with the role cap (cap counts the trailing EOS).
pub fn tokenize(text: &str, vocab: &Vocabulary, cap: usize) -> TokenSeq {
    let words = split_words(text);
    cap_and_close(words.iter().map(|w| vocab.id(w)), cap, words.len())
}

/// Inverse of [`tokenize`] up to canonical spacing; reserved ids vanish.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> String {
    ids.iter()
        .filter(|&&id| id != PAD && id != BOS && id != EOS)
        .filter_map(|&id| vocab.text(id).ok())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Code source to vocabulary ids via the mini-language lexer; structural
/// tokens map to printable markers.
pub fn tokenize_code(source: &str, vocab: &Vocabulary, cap: usize) -> Result<TokenSeq, VocabError> {
    let tokens = minilang::lex(source).map_err(|e| VocabError::Unlexable(e.to_string()))?;
    let texts: Vec<String> = tokens.iter().map(code_token_text).collect();
    Ok(cap_and_close(
        texts.iter().map(|t| vocab.id(t)),
        cap,
        texts.len(),
    ))
}

/// Reconstructs source text from code token ids (the decoder's output
/// surface): markers become structure, everything else joins canonically.
pub fn ids_to_source(ids: &[u32], vocab: &Vocabulary) -> String {
    let mut tokens = Vec::new();
    for &id in ids {
        if id == PAD || id == BOS || id == EOS {
            continue;
        }
        let Ok(text) = vocab.text(id) else { continue };
        let tok = match text {
            CODE_NEWLINE => Token::new(TokenKind::Delim, NEWLINE_TEXT, 0),
            CODE_INDENT => Token::new(TokenKind::Delim, INDENT_TEXT, 0),
            CODE_DEDENT => Token::new(TokenKind::Delim, DEDENT_TEXT, 0),
            other => Token::new(TokenKind::Ident, other, 0),
        };
        tokens.push(tok);
    }
    minilang::render_tokens(&tokens)
}

pub fn code_token_text(token: &Token) -> String {
    match token.text.as_str() {
        NEWLINE_TEXT => CODE_NEWLINE.to_string(),
        INDENT_TEXT => CODE_INDENT.to_string(),
        DEDENT_TEXT => CODE_DEDENT.to_string(),
        other => other.to_string(),
    }
}

fn cap_and_close(ids: impl Iterator<Item = u32>, cap: usize, full_len: usize) -> TokenSeq {
    let keep = cap.saturating_sub(1);
    let truncated = full_len > keep;
    let mut ids: Vec<u32> = ids.take(keep).collect();
    ids.push(EOS);
    TokenSeq { ids, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_over(text: &str, code: &str) -> Vocabulary {
        Vocabulary::build(std::iter::once(text), std::iter::once(code))
    }

    #[test]
    fn reserved_ids_are_stable() {
        let v = vocab_over("", "");
        assert_eq!(v.id("<pad>"), PAD);
        assert_eq!(v.id("<bos>"), BOS);
        assert_eq!(v.id("<eos>"), EOS);
        assert_eq!(v.id("<sep>"), SEP);
        assert_eq!(v.id("<unk>"), UNK);
        assert_eq!(v.id("<tags>"), 5);
        assert_eq!(v.id("<iosamp>"), 9);
    }

    #[test]
    fn simple_statement_is_three_ids_plus_eos() {
        let v = vocab_over("", "x = 1");
        let seq = tokenize("x = 1", &v, 512);
        assert_eq!(seq.ids.len(), 4);
        assert_eq!(*seq.ids.last().unwrap(), EOS);
        assert!(!seq.truncated);
    }

    #[test]
    fn round_trip_without_unk_or_truncation() {
        let v = vocab_over("compute the sum of n integers", "");
        let text = "compute the sum of n integers";
        let seq = tokenize(text, &v, 64);
        assert!(!seq.ids.contains(&UNK));
        assert_eq!(detokenize(&seq.ids, &v), text);
    }

    #[test]
    fn over_cap_text_is_truncated_with_flag() {
        let v = vocab_over("a b c d e f", "");
        let seq = tokenize("a b c d e f", &v, 4);
        assert!(seq.truncated);
        assert_eq!(seq.ids.len(), 4);
        assert_eq!(*seq.ids.last().unwrap(), EOS);
    }

    #[test]
    fn out_of_vocabulary_words_become_unk() {
        let v = vocab_over("known words", "");
        let seq = tokenize("known mystery", &v, 16);
        assert_eq!(seq.ids[0], v.id("known"));
        assert_eq!(seq.ids[1], UNK);
    }

    #[test]
    fn code_round_trips_through_ids() {
        let src = "x = 0\nfor i in range(0, 3):\n    x = x + i\nprint(x)";
        let v = vocab_over("", src);
        let seq = tokenize_code(src, &v, 512).unwrap();
        let back = ids_to_source(&seq.ids, &v);
        let canon = crate::minilang::canonical(src).unwrap();
        assert_eq!(back, canon);
        // And the reconstruction still parses and runs identically.
        let a = crate::minilang::run_source(src, "", 10_000);
        let b = crate::minilang::run_source(&back, "", 10_000);
        assert_eq!(a.output, b.output);
        assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn vocabulary_is_order_independent() {
        let a = Vocabulary::build(["b words", "a words"].into_iter(), std::iter::empty());
        let b = Vocabulary::build(["a words", "b words"].into_iter(), std::iter::empty());
        assert_eq!(a, b);
    }
}
