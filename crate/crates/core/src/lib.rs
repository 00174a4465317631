//! Preprocessing, statistics and evaluation machinery for SPARQL semantic
//! parsing with substituted output vocabularies.
//!
//! The pipeline runs in this order:
//!
//! 1. [`lexer`] turns raw SPARQL text into a normalized [`TokenSequence`].
//! 2. [`masking`] replaces entities and relations with `ent{i}` / `rel{i}`
//!    placeholders and problem characters with printable aliases (`OB`, `CB`).
//! 3. [`vocab`] collects the masked-query vocabulary and [`substitution`]
//!    builds a seeded bijection onto a replacement vocabulary.
//! 4. [`subword`] measures how a subword tokenizer sees that vocabulary.
//! 5. [`eval`] scores predictions by exact match and sorts failures into
//!    error classes.
//!
//! [`attention`] is a standalone numeric implementation of prefix-tuned
//! attention with gradient checks, and [`dataset`] ties the text pipeline to
//! GrailQA-format input files.

pub mod attention;
pub mod dataset;
pub mod eval;
pub mod lexer;
pub mod masking;
pub mod pipeline;
pub mod substitution;
pub mod subword;
pub mod table;
pub mod vocab;
pub mod wordlist;

pub use lexer::{lex_sparql, LexError, TokenSequence};
pub use masking::{demask, mask, MaskError, MaskingConfig, MaskingResult};
pub use substitution::{Scheme, SubstitutionError, SubstitutionMap};
pub use subword::{SubwordModel, VocabStats};
pub use vocab::{extract_vocabulary, Vocabulary};
