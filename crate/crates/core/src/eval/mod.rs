//! Exact-match scoring and error classification of predictions.

mod classify;
pub mod harness;
pub mod wellformed;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{classify_error, has_non_printable, triple_count, ErrorClass};

use crate::lexer::TokenSequence;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{preds} predictions but {golds} gold queries")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("nothing to evaluate")]
    Empty,
}

/// Token-by-token equality after splitting both sides on whitespace.
pub fn exact_match(pred: &str, gold: &str) -> bool {
    pred.split_whitespace().eq(gold.split_whitespace())
}

/// Percentage of predictions that exactly match their gold query.
pub fn exact_match_rate<P: AsRef<str>, G: AsRef<str>>(preds: &[P], golds: &[G]) -> Result<f64, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let matched = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| exact_match(p.as_ref(), g.as_ref()))
        .count();
    Ok(100.0 * matched as f64 / preds.len() as f64)
}

/// Exact-match percentage plus a histogram over [`ErrorClass`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub exact_match_pct: f64,
    pub per_class_counts: BTreeMap<ErrorClass, usize>,
    pub n: usize,
}

impl EvalReport {
    /// Classifies every `(pred, gold)` pair. Both sides must be in the
    /// masked-query vocabulary.
    pub fn from_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a TokenSequence, &'a TokenSequence)>,
    {
        Self::from_classes(pairs.into_iter().map(|(p, g)| classify_error(p, g)))
    }

    pub fn from_classes<I: IntoIterator<Item = ErrorClass>>(classes: I) -> Self {
        let mut per_class_counts: BTreeMap<ErrorClass, usize> = ErrorClass::ALL.iter().map(|&c| (c, 0)).collect();
        let mut n = 0;
        for class in classes {
            *per_class_counts.entry(class).or_default() += 1;
            n += 1;
        }
        let correct = per_class_counts[&ErrorClass::Correct];
        let exact_match_pct = if n == 0 { 0.0 } else { 100.0 * correct as f64 / n as f64 };
        EvalReport {
            exact_match_pct,
            per_class_counts,
            n,
        }
    }

    pub fn count(&self, class: ErrorClass) -> usize {
        self.per_class_counts.get(&class).copied().unwrap_or(0)
    }

    /// Aligned plain-text table: one row for this report under `setting`.
    pub fn to_table(&self, setting: &str) -> String {
        render_eval_table(&[(setting.to_owned(), self.clone())])
    }
}

/// Renders several reports as one table, one row per setting.
pub fn render_eval_table(rows: &[(String, EvalReport)]) -> String {
    let mut header: Vec<String> = vec!["setting".into(), "EM".into(), "n".into()];
    header.extend(ErrorClass::ALL[1..].iter().map(|c| c.name().to_owned()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(setting, r)| {
            let mut row = vec![setting.clone(), format!("{:.2}", r.exact_match_pct), r.n.to_string()];
            row.extend(ErrorClass::ALL[1..].iter().map(|&c| r.count(c).to_string()));
            row
        })
        .collect();
    crate::table::render(&header, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::from_whitespace(s)
    }

    #[test]
    fn exact_match_ignores_whitespace() {
        assert!(exact_match("ASK WHERE OB CB", "ASK  WHERE  OB CB"));
        assert!(exact_match("ASK WHERE OB CB", "ASK WHERE OB CB"));
        assert!(exact_match(" ASK\tWHERE\nOB CB ", "ASK WHERE OB CB"));
        assert!(!exact_match("ASK WHERE CB OB", "ASK WHERE OB CB"));
        assert!(!exact_match("ASK WHERE OB", "ASK WHERE OB CB"));
    }

    #[test]
    fn rates() {
        let golds = ["a b", "c d", "e", "f g"];
        assert_eq!(exact_match_rate(&golds, &golds).unwrap(), 100.0);
        assert_eq!(exact_match_rate(&["", "", "", ""], &golds).unwrap(), 0.0);
        assert_eq!(exact_match_rate(&["a b", "c d", "x", "f  g"], &golds).unwrap(), 75.0);
        assert!(matches!(
            exact_match_rate(&["a"], &golds),
            Err(EvalError::LengthMismatch { preds: 1, golds: 4 })
        ));
        assert!(matches!(exact_match_rate::<&str, &str>(&[], &[]), Err(EvalError::Empty)));
    }

    const GOLD: &str = "SELECT DISTINCT ?x0 WHERE OB ?x0 rel0 ent0 . ?x0 rel1 ent1 . ?x0 rel2 ?x1 . CB";

    #[test]
    fn identical_is_correct() {
        assert_eq!(classify_error(&seq(GOLD), &seq(GOLD)), ErrorClass::Correct);
    }

    #[test]
    fn swapped_entities_are_variable_placement() {
        let pred = GOLD.replace("ent0", "#").replace("ent1", "ent0").replace('#', "ent1");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::VariablePlacement);
        let pred = GOLD.replace("?x1", "?y").replace("?x0", "?x1").replace("?y", "?x0");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::VariablePlacement);
    }

    #[test]
    fn unbalanced_braces_are_syntax() {
        let pred = GOLD.replace(" CB", "");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::Syntax);
    }

    #[test]
    fn missing_triple_is_structural() {
        let pred = GOLD.replace("?x0 rel1 ent1 . ", "");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::Structural);
    }

    #[test]
    fn raw_brace_is_non_printable() {
        let pred = GOLD.replace("OB", "{");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::NonPrintable);
        let pred = format!("{GOLD} \u{7f}");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::NonPrintable);
        let pred = GOLD.replace("rel2", "rel2^");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::NonPrintable);
    }

    #[test]
    fn other_differences_are_intent() {
        let pred = GOLD.replace("rel2", "rel0");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::Intent);
        // A fresh index is only a renaming.
        let pred = GOLD.replace("rel2", "rel3");
        assert_eq!(classify_error(&seq(&pred), &seq(GOLD)), ErrorClass::VariablePlacement);
    }

    #[test]
    fn report_counts() {
        let gold = seq(GOLD);
        let wrong = seq(&GOLD.replace(" CB", ""));
        let report = EvalReport::from_pairs([(&gold, &gold), (&wrong, &gold), (&gold, &gold), (&gold, &gold)]);
        assert_eq!(report.n, 4);
        assert_eq!(report.exact_match_pct, 75.0);
        assert_eq!(report.count(ErrorClass::Syntax), 1);
        assert_eq!(report.per_class_counts.values().sum::<usize>(), report.n);
        let table = report.to_table("original");
        assert!(table.contains("original") && table.contains("75.00"));
    }
}
