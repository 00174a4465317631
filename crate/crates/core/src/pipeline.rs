//! End-to-end preprocessing: load, mask, build the vocabulary and map,
//! substitute, split and export, plus a manifest that pins every input and
//! output by hash.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{
    export_jsonl, load_grailqa, process_records, split, DatasetError, ExportRecord, MaskRecord, ProcessedRecord,
    RawRecord, Reject, SplitSpec,
};
use crate::lexer::TokenSequence;
use crate::masking::MaskingConfig;
use crate::substitution::{generate, Scheme, SubstitutionError, SubstitutionMap};
use crate::subword::{SubwordError, SubwordModel, VocabStats};
use crate::vocab::{extract_vocabulary, literal_census, Vocabulary};
use crate::wordlist::{default_wordlist, DEFAULT_WORDLIST_VERSION};

/// Size of the masked-query vocabulary of the GrailQA training pool.
pub const REFERENCE_VOCAB_SIZE: usize = 48;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Substitution(#[from] SubstitutionError),
    #[error(transparent)]
    Subword(#[from] SubwordError),
    #[error("no usable records in {0}")]
    NoRecords(String),
    #[error("record {id} does not survive the substitution round trip")]
    RoundTrip { id: String },
    #[error("could not write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Masked records of one corpus with the derived vocabulary and the set of
/// pass-through tokens replacement codes must avoid.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub records: Vec<ProcessedRecord>,
    pub rejects: Vec<Reject>,
    pub vocabulary: Vocabulary,
    pub reserved: BTreeSet<String>,
}

impl PreparedCorpus {
    pub fn new(raw: &[RawRecord], config: &MaskingConfig, corpus_id: &str) -> Self {
        let (records, rejects) = process_records(raw, config);
        let masked: Vec<TokenSequence> = records.iter().map(|r| r.masking.masked.clone()).collect();
        PreparedCorpus {
            vocabulary: extract_vocabulary(&masked, corpus_id),
            reserved: literal_census(&masked),
            records,
            rejects,
        }
    }

    pub fn masked(&self) -> Vec<TokenSequence> {
        self.records.iter().map(|r| r.masking.masked.clone()).collect()
    }

    /// Generates the substitution map for `scheme`, using the built-in
    /// wordlist for `dictionary` unless one is supplied.
    pub fn build_map(
        &self,
        scheme: Scheme,
        seed: u64,
        wordlist: Option<&[String]>,
    ) -> Result<SubstitutionMap, SubstitutionError> {
        let default;
        let wordlist = match wordlist {
            Some(w) => w,
            None => {
                default = default_wordlist();
                &default
            }
        };
        let map = generate(scheme, &self.vocabulary, seed, &self.reserved, Some(wordlist))?;
        map.check_collisions(&self.vocabulary, &self.reserved)?;
        Ok(map)
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub scheme: Scheme,
    pub seed: u64,
    /// Defaults to the GrailQA proportions over the usable records.
    pub split: Option<SplitSpec>,
    pub masking: MaskingConfig,
    /// Replacement words for `dictionary`; `None` uses the built-in list.
    pub wordlist: Option<(String, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub records: usize,
}

/// Everything needed to reproduce or audit a preprocessing run. Contains no
/// timestamps, so identical inputs give a byte-identical manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_file: String,
    pub dataset_sha256: String,
    pub records_loaded: usize,
    pub records_malformed: usize,
    pub records_rejected: usize,
    pub records_used: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub split: SplitSpec,
    pub vocab_size: usize,
    pub reference_vocab_size: usize,
    pub vocab_size_delta: i64,
    pub reserved_tokens: usize,
    pub wordlist_version: String,
    pub masking_config_sha256: String,
    pub map_sha256: String,
    pub outputs: Vec<OutputFile>,
    /// Hash over the dataset, config, map and output hashes in order.
    pub chain_sha256: String,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|source| PipelineError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn hash_file(path: &Path, records: usize) -> Result<OutputFile, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Write {
        path: path.display().to_string(),
        source,
    })?;
    Ok(OutputFile {
        name: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        sha256: sha256_hex(&bytes),
        records,
    })
}

/// Runs the whole preprocessing pipeline and writes into `out_dir`:
/// `train.jsonl`, `dev.jsonl`, `test.jsonl` (`{"id","input","target"}`),
/// `masks.jsonl`, `rejects.jsonl`, `map.json`, `masking_config.json` and
/// `manifest.json`.
pub fn run_preprocess(config: &PreprocessConfig) -> Result<Manifest, PipelineError> {
    let dataset_bytes = std::fs::read(&config.dataset).map_err(|source| DatasetError::Read {
        path: config.dataset.display().to_string(),
        source,
    })?;
    let dataset_file = config
        .dataset
        .file_name()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    let loaded = load_grailqa(&config.dataset)?;
    let corpus = PreparedCorpus::new(&loaded.records, &config.masking, &dataset_file);
    if corpus.records.is_empty() {
        return Err(PipelineError::NoRecords(config.dataset.display().to_string()));
    }
    if corpus.vocabulary.len() != REFERENCE_VOCAB_SIZE {
        log::warn!(
            "vocabulary has {} words, reference is {REFERENCE_VOCAB_SIZE}",
            corpus.vocabulary.len()
        );
    }

    let (wordlist_version, wordlist) = match &config.wordlist {
        Some((version, words)) => (version.clone(), Some(words.as_slice())),
        None => (DEFAULT_WORDLIST_VERSION.to_owned(), None),
    };
    let map = corpus.build_map(config.scheme, config.seed, wordlist)?;
    for record in &corpus.records {
        if !crate::dataset::round_trips(record, &map) {
            return Err(PipelineError::RoundTrip { id: record.id.clone() });
        }
    }

    let spec = config
        .split
        .unwrap_or_else(|| SplitSpec::proportional(corpus.records.len(), config.seed));
    let parts = split(&corpus.records, &spec)?;

    let out = &config.out_dir;
    std::fs::create_dir_all(out).map_err(|source| PipelineError::Write {
        path: out.display().to_string(),
        source,
    })?;
    let mut outputs = Vec::new();
    for (name, records) in [("train", &parts.train), ("dev", &parts.dev), ("test", &parts.test)] {
        let path = out.join(format!("{name}.jsonl"));
        let export: Vec<ExportRecord> = records.iter().map(|r| ExportRecord::from_processed(r, &map)).collect();
        export_jsonl(&export, &path)?;
        outputs.push(hash_file(&path, export.len())?);
    }
    let masks: Vec<MaskRecord> = corpus
        .records
        .iter()
        .map(|r| MaskRecord {
            id: r.id.clone(),
            masking: r.masking.clone(),
        })
        .collect();
    let path = out.join("masks.jsonl");
    export_jsonl(&masks, &path)?;
    outputs.push(hash_file(&path, masks.len())?);
    let path = out.join("rejects.jsonl");
    export_jsonl(&corpus.rejects, &path)?;
    outputs.push(hash_file(&path, corpus.rejects.len())?);

    let map_json = map.to_json();
    write_file(&out.join("map.json"), map_json.as_bytes())?;
    let config_json = config.masking.to_json();
    write_file(&out.join("masking_config.json"), config_json.as_bytes())?;

    let dataset_sha256 = sha256_hex(&dataset_bytes);
    let masking_config_sha256 = sha256_hex(config_json.as_bytes());
    let map_sha256 = sha256_hex(map_json.as_bytes());
    let mut chain = Sha256::new();
    for h in [&dataset_sha256, &masking_config_sha256, &map_sha256]
        .into_iter()
        .chain(outputs.iter().map(|o| &o.sha256))
    {
        chain.update(h.as_bytes());
    }

    let manifest = Manifest {
        dataset_file,
        dataset_sha256,
        records_loaded: loaded.records.len(),
        records_malformed: loaded.malformed,
        records_rejected: corpus.rejects.len(),
        records_used: corpus.records.len(),
        scheme: config.scheme,
        seed: config.seed,
        split: spec,
        vocab_size: corpus.vocabulary.len(),
        reference_vocab_size: REFERENCE_VOCAB_SIZE,
        vocab_size_delta: corpus.vocabulary.len() as i64 - REFERENCE_VOCAB_SIZE as i64,
        reserved_tokens: corpus.reserved.len(),
        wordlist_version,
        masking_config_sha256,
        map_sha256,
        outputs,
        chain_sha256: hex::encode(chain.finalize()),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(&out.join("manifest.json"), manifest_json.as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub scheme: Scheme,
    pub stats: VocabStats,
}

/// TSVS, ALFL and both compression ratios for each scheme, relative to the
/// original vocabulary. The baseline is always measured, whether or not
/// `original` is among `schemes`.
pub fn vocab_stats(
    corpus: &PreparedCorpus,
    model: &SubwordModel,
    schemes: &[Scheme],
    seed: u64,
    wordlist: Option<&[String]>,
) -> Result<Vec<StatsRow>, PipelineError> {
    let masked = corpus.masked();
    let baseline = VocabStats::measure(model, corpus.vocabulary.words(), &masked, None)?;
    schemes
        .iter()
        .map(|&scheme| {
            let map = corpus.build_map(scheme, seed, wordlist)?;
            let words: Vec<String> = corpus
                .vocabulary
                .words()
                .iter()
                .map(|w| map.get(w).unwrap_or(w).to_owned())
                .collect();
            let substituted: Vec<TokenSequence> = masked.iter().map(|q| map.substitute(q)).collect();
            let stats = VocabStats::measure(model, &words, &substituted, Some((baseline.tsvs, baseline.alfl)))?;
            Ok(StatsRow { scheme, stats })
        })
        .collect()
}

pub fn render_stats_table(rows: &[StatsRow]) -> String {
    let header: Vec<String> = ["setting", "TSVS", "ALFL", "vocab ratio", "length ratio"]
        .map(String::from)
        .to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scheme.to_string(),
                r.stats.tsvs.to_string(),
                format!("{:.2}", r.stats.alfl),
                format!("{:.4}", r.stats.vocab_compression_ratio),
                format!("{:.4}", r.stats.length_compression_ratio),
            ]
        })
        .collect();
    crate::table::render(&header, &body)
}
