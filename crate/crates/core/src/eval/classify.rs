use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::wellformed::{is_well_formed, CLOSE_BRACE, OPEN_BRACE};
use crate::lexer::TokenSequence;
use crate::masking::{placeholder_index, ENTITY_PREFIX, RELATION_PREFIX};

/// Failure classes for a prediction, checked in declaration order after
/// `Correct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Correct,
    NonPrintable,
    Syntax,
    VariablePlacement,
    Structural,
    Intent,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 6] = [
        ErrorClass::Correct,
        ErrorClass::NonPrintable,
        ErrorClass::Syntax,
        ErrorClass::VariablePlacement,
        ErrorClass::Structural,
        ErrorClass::Intent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Correct => "correct",
            ErrorClass::NonPrintable => "non_printable",
            ErrorClass::Syntax => "syntax",
            ErrorClass::VariablePlacement => "variable_placement",
            ErrorClass::Structural => "structural",
            ErrorClass::Intent => "intent",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown error class {s:?}"))
    }
}

/// True if the token has characters outside printable ASCII or a raw brace
/// or caret that masking should have aliased.
pub fn has_non_printable(token: &str) -> bool {
    token.chars().any(|c| !c.is_ascii_graphic() || matches!(c, '{' | '}' | '^'))
}

#[derive(Debug, PartialEq, Eq, Hash)]
enum Canonical<'a> {
    Entity(usize),
    Relation(usize),
    Variable(usize),
    Other(&'a str),
}

// Renames placeholders and variables by first occurrence within each family,
// so two sequences that differ only by a consistent renaming compare equal.
fn canonical_form(tokens: &TokenSequence) -> Vec<Canonical<'_>> {
    fn number<'a>(table: &mut HashMap<&'a str, usize>, token: &'a str) -> usize {
        let next = table.len();
        *table.entry(token).or_insert(next)
    }
    let mut entities = HashMap::new();
    let mut relations = HashMap::new();
    let mut variables = HashMap::new();
    tokens
        .iter()
        .map(|t| {
            if placeholder_index(ENTITY_PREFIX, t).is_some() {
                Canonical::Entity(number(&mut entities, t))
            } else if placeholder_index(RELATION_PREFIX, t).is_some() {
                Canonical::Relation(number(&mut relations, t))
            } else if (t.starts_with('?') || t.starts_with('$')) && t.len() > 1 {
                Canonical::Variable(number(&mut variables, t))
            } else {
                Canonical::Other(t.as_str())
            }
        })
        .collect()
}

/// Number of `.`-terminated patterns inside the outermost group.
pub fn triple_count(tokens: &TokenSequence) -> usize {
    let mut depth = 0usize;
    let mut count = 0;
    for t in tokens {
        match t.as_str() {
            OPEN_BRACE => depth += 1,
            CLOSE_BRACE => depth = depth.saturating_sub(1),
            "." if depth > 0 => count += 1,
            _ => {}
        }
    }
    count
}

/// Assigns a prediction to exactly one class. Both sequences must already be
/// in the masked-query vocabulary.
///
/// The cascade: equal → `correct`; non-printable characters → `non_printable`;
/// malformed → `syntax`; equal up to a renaming of entity, relation or
/// variable indices → `variable_placement`; different triple count →
/// `structural`; anything else → `intent`.
pub fn classify_error(pred: &TokenSequence, gold: &TokenSequence) -> ErrorClass {
    if pred == gold {
        return ErrorClass::Correct;
    }
    if pred.iter().any(|t| has_non_printable(t)) {
        return ErrorClass::NonPrintable;
    }
    if !is_well_formed(pred.as_slice()) {
        return ErrorClass::Syntax;
    }
    if canonical_form(pred) == canonical_form(gold) {
        return ErrorClass::VariablePlacement;
    }
    if triple_count(pred) != triple_count(gold) {
        return ErrorClass::Structural;
    }
    ErrorClass::Intent
}
