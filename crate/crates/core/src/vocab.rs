//! Masked-query vocabulary extraction.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::lexer::TokenSequence;

/// Distinct non-literal tokens of a masked corpus, in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<String>,
    pub source_corpus_id: String,
}

impl Vocabulary {
    /// Builds a vocabulary from words, dropping duplicates but keeping order.
    pub fn from_words<I, S>(words: I, source_corpus_id: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let words = words
            .into_iter()
            .map(Into::into)
            .filter(|w: &String| !w.is_empty() && !w.chars().any(char::is_whitespace))
            .filter(|w| seen.insert(w.clone()))
            .collect();
        Vocabulary {
            words,
            source_corpus_id: source_corpus_id.into(),
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.iter().any(|w| w == word)
    }

    /// Words present here but not in `other`, and words in `other` but not here.
    pub fn diff<'a>(&'a self, other: &'a Vocabulary) -> (Vec<&'a str>, Vec<&'a str>) {
        let mine: HashSet<&str> = self.words.iter().map(String::as_str).collect();
        let theirs: HashSet<&str> = other.words.iter().map(String::as_str).collect();
        (
            self.words.iter().map(String::as_str).filter(|w| !theirs.contains(w)).collect(),
            other.words.iter().map(String::as_str).filter(|w| !mine.contains(w)).collect(),
        )
    }
}

/// True for tokens that substitution leaves alone: quoted strings and numbers.
pub fn is_literal(token: &str) -> bool {
    token.starts_with('"') || token.starts_with('\'') || is_numeric(token)
}

fn is_numeric(token: &str) -> bool {
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let mut parts = mantissa.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    let mantissa_ok = digits(int)
        && frac.is_none_or(digits)
        && (!int.is_empty() || frac.is_some_and(|f| !f.is_empty()));
    let exponent_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && digits(e)
    });
    mantissa_ok && exponent_ok
}

/// Collects the vocabulary of a masked corpus: every distinct token except
/// literals. Keywords, aliases, variables and placeholders are all words.
pub fn extract_vocabulary(corpus: &[TokenSequence], source_corpus_id: &str) -> Vocabulary {
    Vocabulary::from_words(
        corpus.iter().flat_map(|q| q.iter()).filter(|t| !is_literal(t)).cloned(),
        source_corpus_id,
    )
}

/// Literal tokens that pass through substitution untouched. Replacement codes
/// must avoid these or substitution stops being invertible.
pub fn literal_census(corpus: &[TokenSequence]) -> BTreeSet<String> {
    corpus
        .iter()
        .flat_map(|q| q.iter())
        .filter(|t| is_literal(t))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_query_vocabulary() {
        let q = TokenSequence::from_whitespace(
            "SELECT DISTINCT ?x0 WHERE OB ?x0 :type.object.type rel0 . VALUES ?x1 OB ent0 CB ?x0 rel1 ?x1 . FILTER ( ?x0 != ?x1 ) CB",
        );
        let v = extract_vocabulary(&[q], "published");
        let expected = [
            "SELECT", "DISTINCT", "?x0", "WHERE", "OB", ":type.object.type", "rel0", ".", "VALUES", "?x1", "ent0",
            "CB", "rel1", "FILTER", "(", "!=", ")",
        ];
        assert_eq!(v.words(), expected);
        assert_eq!(v.len(), 17);
    }

    #[test]
    fn empty_corpus() {
        assert!(extract_vocabulary(&[], "none").is_empty());
    }

    #[test]
    fn literals_are_excluded() {
        let q = TokenSequence::from_whitespace(r#"ASK WHERE OB ent0 rel0 ?obj filter ( ?obj = 22.4 ) "a" CB LIMIT 1"#);
        let v = extract_vocabulary(std::slice::from_ref(&q), "intro");
        assert!(!v.contains("22.4") && !v.contains("1") && !v.contains("\"a\""));
        assert!(v.contains("LIMIT"));
        let lits = literal_census(&[q]);
        assert_eq!(lits.into_iter().collect::<Vec<_>>(), ["\"a\"", "1", "22.4"]);
    }

    #[test]
    fn numeric_forms() {
        for t in ["1", "22.4", "-3", "+0.5", ".5", "1e10", "2.5E-3", "7."] {
            assert!(is_numeric(t), "{t}");
        }
        for t in ["", ".", "e5", "1e", "?x0", "ent0", "1.2.3", "-", "0X"] {
            assert!(!is_numeric(t), "{t}");
        }
    }

    #[test]
    fn diff_reports_both_sides() {
        let a = Vocabulary::from_words(["a", "b", "c"], "a");
        let b = Vocabulary::from_words(["b", "c", "d"], "b");
        assert_eq!(a.diff(&b), (vec!["a"], vec!["d"]));
    }
}
