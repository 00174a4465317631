//! GrailQA-format ingestion, seeded splitting and JSONL export.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::lexer::{lex_sparql, TokenSequence};
use crate::masking::{demask, mask, strip_prologue, MaskingConfig, MaskingResult};
use crate::substitution::SubstitutionMap;

/// Split sizes used for GrailQA: the official train file re-split three ways.
pub const GRAILQA_TRAIN: usize = 31035;
pub const GRAILQA_DEV: usize = 4434;
pub const GRAILQA_TEST: usize = 8868;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("could not read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a JSON array of questions: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line { path: String, line: usize, message: String },
    #[error("split needs {needed} records but only {available} are available")]
    SplitTooLarge { needed: usize, available: usize },
    #[error("could not write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One question as it appears in the source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub question: String,
    pub sparql: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<RawRecord>,
    /// Entries skipped for missing or mistyped fields or a duplicate id.
    pub malformed: usize,
}

/// Parses a GrailQA JSON array. Each entry needs `qid` (string or number),
/// `question` and `sparql_query`; anything else is skipped and counted.
pub fn parse_grailqa(text: &str, path_label: &str) -> Result<LoadReport, DatasetError> {
    let entries: Vec<Value> = serde_json::from_str(text).map_err(|source| DatasetError::Parse {
        path: path_label.to_owned(),
        source,
    })?;
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (i, entry) in entries.iter().enumerate() {
        match raw_record(entry) {
            Some(record) if seen.insert(record.id.clone()) => report.records.push(record),
            Some(record) => {
                log::warn!("{path_label}: entry {i} repeats id {}", record.id);
                report.malformed += 1;
            }
            None => {
                log::warn!("{path_label}: entry {i} is malformed, skipping");
                report.malformed += 1;
            }
        }
    }
    Ok(report)
}

fn raw_record(entry: &Value) -> Option<RawRecord> {
    let id = match entry.get("qid").or_else(|| entry.get("id"))? {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    let question = entry.get("question")?.as_str()?.to_owned();
    let sparql = entry
        .get("sparql_query")
        .or_else(|| entry.get("sparql"))?
        .as_str()?
        .to_owned();
    if sparql.trim().is_empty() {
        return None;
    }
    Some(RawRecord { id, question, sparql })
}

pub fn load_grailqa(path: impl AsRef<Path>) -> Result<LoadReport, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_grailqa(&text, &path.display().to_string())
}

/// A record after lexing and masking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedRecord {
    pub id: String,
    pub question: String,
    /// Normalized query body (prologue removed), the round-trip reference.
    pub query: TokenSequence,
    pub masking: MaskingResult,
}

/// A record that failed preprocessing, kept for inspection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub id: String,
    pub stage: String,
    pub reason: String,
}

/// Lexes, strips the prologue from and masks every record. Failures are
/// returned as rejects rather than dropped.
pub fn process_records(raw: &[RawRecord], config: &MaskingConfig) -> (Vec<ProcessedRecord>, Vec<Reject>) {
    let mut processed = Vec::with_capacity(raw.len());
    let mut rejects = Vec::new();
    for r in raw {
        let reject = |stage: &str, reason: String| Reject {
            id: r.id.clone(),
            stage: stage.to_owned(),
            reason,
        };
        let tokens = match lex_sparql(&r.sparql) {
            Ok(t) => t,
            Err(e) => {
                rejects.push(reject("lex", e.to_string()));
                continue;
            }
        };
        let (_, body) = strip_prologue(&tokens);
        if body.is_empty() {
            rejects.push(reject("lex", "query has no body".into()));
            continue;
        }
        let masking = match mask(&body, config) {
            Ok(m) => m,
            Err(e) => {
                rejects.push(reject("mask", e.to_string()));
                continue;
            }
        };
        processed.push(ProcessedRecord {
            id: r.id.clone(),
            question: r.question.clone(),
            query: body,
            masking,
        });
    }
    (processed, rejects)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_n: usize,
    pub dev_n: usize,
    pub test_n: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn grailqa(seed: u64) -> Self {
        SplitSpec {
            train_n: GRAILQA_TRAIN,
            dev_n: GRAILQA_DEV,
            test_n: GRAILQA_TEST,
            seed,
        }
    }

    /// Splits `n` records in the same proportions as the GrailQA re-split,
    /// reproducing its exact sizes when `n` is the GrailQA pool size.
    pub fn proportional(n: usize, seed: u64) -> Self {
        let total = (GRAILQA_TRAIN + GRAILQA_DEV + GRAILQA_TEST) as f64;
        let dev_n = (n as f64 * GRAILQA_DEV as f64 / total).round() as usize;
        let test_n = (n as f64 * GRAILQA_TEST as f64 / total).round() as usize;
        SplitSpec {
            train_n: n - dev_n.min(n) - test_n.min(n - dev_n.min(n)),
            dev_n,
            test_n,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.train_n + self.dev_n + self.test_n
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle followed by a contiguous train/dev/test partition.
pub fn split<T: Clone>(records: &[T], spec: &SplitSpec) -> Result<Split<T>, DatasetError> {
    if spec.total() > records.len() {
        return Err(DatasetError::SplitTooLarge {
            needed: spec.total(),
            available: records.len(),
        });
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let take = |range: std::ops::Range<usize>| order[range].iter().map(|&i| records[i].clone()).collect();
    let a = spec.train_n;
    let b = a + spec.dev_n;
    let c = b + spec.test_n;
    Ok(Split {
        train: take(0..a),
        dev: take(a..b),
        test: take(b..c),
    })
}

/// One model-ready example: question in, substituted masked query out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub id: String,
    pub input: String,
    pub target: String,
}

impl ExportRecord {
    pub fn from_processed(record: &ProcessedRecord, map: &SubstitutionMap) -> Self {
        ExportRecord {
            id: record.id.clone(),
            input: record.question.clone(),
            target: map.substitute(&record.masking.masked).join(),
        }
    }
}

/// Per-record masking maps, written next to the exported splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub id: String,
    #[serde(flatten)]
    pub masking: MaskingResult,
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut writer: W) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Writes one JSON object per line. Output is byte-deterministic.
pub fn export_jsonl<T: Serialize>(records: &[T], out_path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = out_path.as_ref();
    let wrap = |source| DatasetError::Write {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    write_jsonl(records, BufWriter::new(file)).map_err(wrap)
}

/// Reads a JSONL file of `T`, skipping blank lines and naming the line of
/// the first schema error.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>, DatasetError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let file = File::open(path).map_err(|source| DatasetError::Read {
        path: label.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Read {
            path: label.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Line {
            path: label.clone(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Checks that a processed record survives substitute, desubstitute and
/// demask unchanged.
pub fn round_trips(record: &ProcessedRecord, map: &SubstitutionMap) -> bool {
    let substituted = map.substitute(&record.masking.masked);
    let back = map.desubstitute(&substituted);
    if !back.unknown.is_empty() || back.tokens != record.masking.masked {
        return false;
    }
    let restored = MaskingResult {
        masked: back.tokens,
        ..record.masking.clone()
    };
    demask(&restored).is_ok_and(|t| t == record.query)
}
