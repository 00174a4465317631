//! Scores a predictions file against an exported split.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{classify_error, exact_match, EvalReport, ErrorClass};
use crate::dataset::{read_jsonl, DatasetError, ExportRecord};
use crate::lexer::TokenSequence;
use crate::substitution::SubstitutionMap;

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub prediction: String,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Load(#[from] DatasetError),
    #[error("duplicate id {id:?} in {which}")]
    DuplicateId { which: &'static str, id: String },
    #[error("ids do not line up: {} missing predictions (first: {:?}), {} unexpected predictions (first: {:?})",
        missing.len(), missing.first(), extra.len(), extra.first())]
    Misaligned { missing: Vec<String>, extra: Vec<String> },
    #[error("no records to evaluate")]
    Empty,
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>, HarnessError> {
    Ok(read_jsonl(path)?)
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<ExportRecord>, HarnessError> {
    Ok(read_jsonl(path)?)
}

/// Pairs each gold record with the prediction of the same id, keeping gold
/// order. Every gold id needs exactly one prediction and vice versa.
pub fn align<'a>(
    golds: &'a [ExportRecord],
    preds: &'a [Prediction],
) -> Result<Vec<(&'a ExportRecord, &'a Prediction)>, HarnessError> {
    let mut by_id = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(HarnessError::DuplicateId {
                which: "predictions",
                id: p.id.clone(),
            });
        }
    }
    let mut gold_ids = HashSet::with_capacity(golds.len());
    for g in golds {
        if !gold_ids.insert(g.id.as_str()) {
            return Err(HarnessError::DuplicateId {
                which: "gold",
                id: g.id.clone(),
            });
        }
    }
    let missing: Vec<String> = golds
        .iter()
        .filter(|g| !by_id.contains_key(g.id.as_str()))
        .map(|g| g.id.clone())
        .collect();
    let extra: Vec<String> = preds
        .iter()
        .filter(|p| !gold_ids.contains(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(HarnessError::Misaligned { missing, extra });
    }
    Ok(golds.iter().map(|g| (g, by_id[g.id.as_str()])).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordResult {
    pub id: String,
    pub exact_match: bool,
    pub class: ErrorClass,
    /// Prediction tokens outside the replacement vocabulary.
    pub unknown_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scheme: String,
    pub report: EvalReport,
    pub records: Vec<RecordResult>,
}

impl Evaluation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("evaluation serializes")
    }

    /// Writes `report.json` (everything) and `report.txt` (the summary table).
    pub fn write(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json() + "\n")?;
        std::fs::write(dir.join("report.txt"), self.report.to_table(&self.scheme))
    }
}

// Maps a substituted sequence back to masked tokens. A prediction token that
// has no inverse but happens to be an original vocabulary word is tagged so
// it cannot pass for the word it would otherwise decode to.
fn decode(map: &SubstitutionMap, text: &str) -> (TokenSequence, Vec<String>) {
    let back = map.desubstitute(&TokenSequence::from_whitespace(text));
    if back.unknown.is_empty() {
        return (back.tokens, back.unknown);
    }
    let unknown: HashSet<&str> = back.unknown.iter().map(String::as_str).collect();
    let substituted = TokenSequence::from_whitespace(text);
    let tokens: Vec<String> = substituted
        .iter()
        .zip(back.tokens.iter())
        .map(|(raw, decoded)| {
            if unknown.contains(raw.as_str()) && map.get(raw).is_some_and(|r| r != raw) {
                format!("UNK:{raw}")
            } else {
                decoded.clone()
            }
        })
        .collect();
    let tokens = TokenSequence::new(tokens).unwrap_or_else(|| TokenSequence::from_whitespace(""));
    (tokens, back.unknown)
}

/// Decodes gold and prediction through `map`, then scores and classifies
/// every pair.
pub fn evaluate_aligned(pairs: &[(&ExportRecord, &Prediction)], map: &SubstitutionMap) -> Result<Evaluation, HarnessError> {
    if pairs.is_empty() {
        return Err(HarnessError::Empty);
    }
    let records: Vec<RecordResult> = pairs
        .iter()
        .map(|(gold, pred)| {
            let (gold_tokens, _) = decode(map, &gold.target);
            let (pred_tokens, unknown_tokens) = decode(map, &pred.prediction);
            RecordResult {
                id: gold.id.clone(),
                exact_match: exact_match(&pred.prediction, &gold.target),
                class: classify_error(&pred_tokens, &gold_tokens),
                unknown_tokens,
            }
        })
        .collect();
    Ok(Evaluation {
        scheme: map.scheme().to_string(),
        report: EvalReport::from_classes(records.iter().map(|r| r.class)),
        records,
    })
}

pub fn evaluate_predictions(
    golds: &[ExportRecord],
    preds: &[Prediction],
    map: &SubstitutionMap,
) -> Result<Evaluation, HarnessError> {
    evaluate_aligned(&align(golds, preds)?, map)
}
