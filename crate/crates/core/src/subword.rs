//! Subword segmentation and the tokenizer-level statistics built on it:
//! TSVS (distinct subword pieces over a vocabulary), ALFL (mean subword
//! length of a corpus of logical forms) and the two compression ratios.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::TokenSequence;
use crate::vocab::Vocabulary;

/// Word-boundary marker used by SentencePiece vocabularies (U+2581).
pub const SENTENCEPIECE_MARKER: &str = "\u{2581}";

#[derive(Debug, Error)]
pub enum SubwordError {
    #[error("cannot average over an empty corpus")]
    EmptyCorpus,
    #[error("original {what} is zero")]
    ZeroDenominator { what: &'static str },
    #[error("could not read piece file: {0}")]
    Io(#[from] std::io::Error),
}

/// An immutable subword inventory with greedy longest-match segmentation.
#[derive(Debug, Clone)]
pub struct SubwordModel {
    pieces: HashSet<String>,
    unknown_piece: String,
    boundary_marker: Option<String>,
    max_piece_chars: usize,
}

impl SubwordModel {
    pub fn new<I, S>(pieces: I, unknown_piece: impl Into<String>, boundary_marker: Option<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let pieces: HashSet<String> = pieces.into_iter().map(Into::into).filter(|p| !p.is_empty()).collect();
        let max_piece_chars = pieces.iter().map(|p| p.chars().count()).max().unwrap_or(0);
        SubwordModel {
            pieces,
            unknown_piece: unknown_piece.into(),
            boundary_marker: boundary_marker.filter(|m| !m.is_empty()),
            max_piece_chars,
        }
    }

    /// Parses a piece file: one piece per line, optionally followed by a tab
    /// and a score, which is ignored. Exported SentencePiece vocabularies have
    /// this layout.
    pub fn parse_piece_file(text: &str, boundary_marker: Option<String>) -> Self {
        let pieces = text
            .lines()
            .map(|line| line.split('\t').next().unwrap_or(""))
            .filter(|p| !p.is_empty())
            .map(str::to_owned);
        Self::new(pieces, "<unk>", boundary_marker)
    }

    pub fn from_piece_file(path: impl AsRef<Path>, boundary_marker: Option<String>) -> Result<Self, SubwordError> {
        Ok(Self::parse_piece_file(&std::fs::read_to_string(path)?, boundary_marker))
    }

    /// A model whose pieces are the printable ASCII characters, bare and (if a
    /// marker is given) marker-prefixed. Every printable word segments into
    /// one piece per character.
    pub fn ascii_characters(boundary_marker: Option<String>) -> Self {
        let chars: Vec<String> = (0x21u8..0x7f).map(|b| (b as char).to_string()).collect();
        let marked: Vec<String> = match &boundary_marker {
            Some(m) => chars.iter().map(|c| format!("{m}{c}")).collect(),
            None => Vec::new(),
        };
        Self::new(chars.into_iter().chain(marked), "<unk>", boundary_marker)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.pieces.contains(piece)
    }

    pub fn unknown_piece(&self) -> &str {
        &self.unknown_piece
    }

    pub fn boundary_marker(&self) -> Option<&str> {
        self.boundary_marker.as_deref()
    }

    /// Greedy longest-match segmentation of one word, left to right.
    ///
    /// The first piece is looked up in its marker-prefixed form first. If no
    /// marked piece matches and the bare marker is itself a piece, the marker
    /// is emitted alone (as SentencePiece does) and matching continues bare.
    /// Characters covered by no piece become the unknown piece.
    pub fn segment(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        let mut out = Vec::new();
        let mut pos = 0;
        if chars.is_empty() {
            return out;
        }

        if let Some(marker) = &self.boundary_marker {
            let longest = self.max_piece_chars.min(chars.len());
            let hit = (1..=longest).rev().find_map(|len| {
                let candidate: String = marker.chars().chain(chars[..len].iter().copied()).collect();
                self.pieces.contains(&candidate).then_some((candidate, len))
            });
            match hit {
                Some((piece, len)) => {
                    out.push(piece);
                    pos = len;
                }
                None if self.pieces.contains(marker) => out.push(marker.clone()),
                None => {}
            }
        }

        while pos < chars.len() {
            let longest = self.max_piece_chars.min(chars.len() - pos);
            let hit = (1..=longest).rev().find_map(|len| {
                let candidate: String = chars[pos..pos + len].iter().collect();
                self.pieces.contains(&candidate).then_some((candidate, len))
            });
            match hit {
                Some((piece, len)) => {
                    out.push(piece);
                    pos += len;
                }
                None => {
                    out.push(self.unknown_piece.clone());
                    pos += 1;
                }
            }
        }
        out
    }

    /// Removes the boundary marker from the front of a piece.
    pub fn strip_marker<'a>(&self, piece: &'a str) -> &'a str {
        match &self.boundary_marker {
            Some(m) => piece.strip_prefix(m.as_str()).unwrap_or(piece),
            None => piece,
        }
    }

    /// Segments whitespace-separated text, each word starting a new boundary.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().flat_map(|w| self.segment(w)).collect()
    }
}

/// Number of distinct pieces the model produces over the vocabulary's words.
pub fn tsvs(model: &SubwordModel, vocab: &Vocabulary) -> usize {
    tsvs_of_words(model, vocab.words())
}

pub fn tsvs_of_words<S: AsRef<str>>(model: &SubwordModel, words: &[S]) -> usize {
    words
        .iter()
        .flat_map(|w| model.segment(w.as_ref()))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Mean number of pieces per query, each query tokenized as its space-joined
/// text.
pub fn alfl(model: &SubwordModel, corpus: &[TokenSequence]) -> Result<f64, SubwordError> {
    if corpus.is_empty() {
        return Err(SubwordError::EmptyCorpus);
    }
    let total: usize = corpus.iter().map(|q| model.tokenize(&q.join()).len()).sum();
    Ok(total as f64 / corpus.len() as f64)
}

/// `(TSVS_new / TSVS_orig, ALFL_new / ALFL_orig)`.
pub fn compression_ratios(
    orig_tsvs: usize,
    orig_alfl: f64,
    new_tsvs: usize,
    new_alfl: f64,
) -> Result<(f64, f64), SubwordError> {
    if orig_tsvs == 0 {
        return Err(SubwordError::ZeroDenominator { what: "TSVS" });
    }
    if orig_alfl == 0.0 {
        return Err(SubwordError::ZeroDenominator { what: "ALFL" });
    }
    Ok((new_tsvs as f64 / orig_tsvs as f64, new_alfl / orig_alfl))
}

/// Tokenizer statistics for one vocabulary setting, relative to a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabStats {
    pub tsvs: usize,
    pub alfl: f64,
    pub vocab_compression_ratio: f64,
    pub length_compression_ratio: f64,
}

impl VocabStats {
    /// Measures `vocab`/`corpus` and compares against `(baseline_tsvs, baseline_alfl)`.
    pub fn measure(
        model: &SubwordModel,
        vocab_words: &[String],
        corpus: &[TokenSequence],
        baseline: Option<(usize, f64)>,
    ) -> Result<Self, SubwordError> {
        let tsvs = tsvs_of_words(model, vocab_words);
        let alfl = alfl(model, corpus)?;
        let (orig_tsvs, orig_alfl) = baseline.unwrap_or((tsvs, alfl));
        let (vocab_compression_ratio, length_compression_ratio) =
            compression_ratios(orig_tsvs, orig_alfl, tsvs, alfl)?;
        Ok(VocabStats {
            tsvs,
            alfl,
            vocab_compression_ratio,
            length_compression_ratio,
        })
    }
}
