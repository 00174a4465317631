//! SPARQL lexing into normalized, whitespace-free token sequences.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("query text is empty")]
    Empty,
    #[error("unterminated string literal starting at byte offset {offset}")]
    UnterminatedString { offset: usize },
}

/// An ordered list of non-empty tokens, none of which contains whitespace.
///
/// This is the unit of comparison for every later stage: masking, vocabulary
/// extraction, substitution and exact-match scoring all operate token by token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence from already-split tokens.
    ///
    /// Returns `None` if any token is empty or contains whitespace.
    pub fn new(tokens: Vec<String>) -> Option<Self> {
        tokens
            .iter()
            .all(|t| is_valid_token(t))
            .then_some(TokenSequence(tokens))
    }

    /// Splits on runs of whitespace. This is how model output is read back.
    pub fn from_whitespace(text: &str) -> Self {
        TokenSequence(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }

    // Callers inside the crate guarantee the token invariant themselves.
    pub(crate) fn from_vec_unchecked(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| is_valid_token(t)));
        TokenSequence(tokens)
    }
}

fn is_valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

impl Index<usize> for TokenSequence {
    type Output = String;

    fn index(&self, i: usize) -> &String {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl IntoIterator for TokenSequence {
    type Item = String;
    type IntoIter = std::vec::IntoIter<String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

// Characters that always end a bare word.
fn is_delimiter(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '{' | '}' | '(' | ')' | ',' | ';' | '*' | '^' | '[' | ']' | '"' | '\'' | '<' | '>'
                | '=' | '!' | '&' | '|'
        )
}

fn is_word_char(c: char) -> bool {
    !is_delimiter(c) && c != '.'
}

/// Lexes SPARQL text into a normalized [`TokenSequence`].
///
/// Punctuation and operators become standalone tokens, prefixed names and
/// numbers keep their internal dots (`:m.0199qf`, `22.4`), IRIs in angle
/// brackets and quoted literals stay whole. Whitespace inside a quoted literal
/// is rewritten as a `\uXXXX` escape, which SPARQL treats as the same
/// character, so no token ever contains whitespace.
pub fn lex_sparql(query_text: &str) -> Result<TokenSequence, LexError> {
    let chars: Vec<(usize, char)> = query_text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < chars.len() {
        let (offset, c) = chars[i];
        let next = chars.get(i + 1).map(|&(_, c)| c);

        if c.is_whitespace() {
            i += 1;
            continue;
        }

        match c {
            '"' | '\'' => {
                let (token, end) = lex_string(&chars, i).ok_or(LexError::UnterminatedString { offset })?;
                tokens.push(token);
                i = end;
            }
            '<' if next == Some('=') => {
                tokens.push("<=".to_owned());
                i += 2;
            }
            '<' => match iri_end(&chars, i) {
                Some(end) => {
                    tokens.push(chars[i..end].iter().map(|&(_, c)| c).collect());
                    i = end;
                }
                None => {
                    tokens.push("<".to_owned());
                    i += 1;
                }
            },
            '>' | '!' if next == Some('=') => {
                tokens.push(format!("{c}="));
                i += 2;
            }
            '&' | '|' if next == Some(c) => {
                tokens.push(format!("{c}{c}"));
                i += 2;
            }
            '.' => {
                tokens.push(".".to_owned());
                i += 1;
            }
            c if is_delimiter(c) => {
                tokens.push(c.to_string());
                i += 1;
            }
            _ => {
                let start = i;
                while i < chars.len() {
                    let ch = chars[i].1;
                    if is_word_char(ch) || (ch == '.' && chars.get(i + 1).is_some_and(|&(_, n)| is_word_char(n))) {
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(chars[start..i].iter().map(|&(_, c)| c).collect());
            }
        }
    }

    if tokens.is_empty() {
        return Err(LexError::Empty);
    }
    Ok(TokenSequence::from_vec_unchecked(tokens))
}

// Returns the literal token (quotes included) and the index just past it.
fn lex_string(chars: &[(usize, char)], start: usize) -> Option<(String, usize)> {
    let quote = chars[start].1;
    let mut out = String::new();
    out.push(quote);
    let mut i = start + 1;
    while i < chars.len() {
        let c = chars[i].1;
        if c == '\\' {
            out.push(c);
            if let Some(&(_, escaped)) = chars.get(i + 1) {
                push_literal_char(&mut out, escaped);
                i += 2;
                continue;
            }
            return None;
        }
        if c == quote {
            out.push(c);
            return Some((out, i + 1));
        }
        push_literal_char(&mut out, c);
        i += 1;
    }
    None
}

fn push_literal_char(out: &mut String, c: char) {
    if c.is_whitespace() {
        out.push_str(&format!("\\u{:04X}", c as u32));
    } else {
        out.push(c);
    }
}

// An IRI reference runs from `<` to the next `>` with no whitespace or
// characters that cannot appear in an IRI.
fn iri_end(chars: &[(usize, char)], start: usize) -> Option<usize> {
    let mut i = start + 1;
    while i < chars.len() {
        match chars[i].1 {
            '>' => return Some(i + 1),
            c if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') => {
                return None
            }
            _ => i += 1,
        }
    }
    None
}
