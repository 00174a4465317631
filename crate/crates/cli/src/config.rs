//! Optional JSON config file. Each subcommand reads its own section; flags
//! given on the command line win over the file.
//!
//! ```json
//! {
//!   "preprocess": { "dataset": "grailqa_v1.0_train.json", "out": "out", "scheme": "char2", "seed": 0 },
//!   "stats": { "pieces": "t5_pieces.txt" },
//!   "gradcheck": { "instances": 100 }
//! }
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scheme: Option<String>,
    pub seed: Option<u64>,
    pub split: Option<[usize; 3]>,
    pub masking_config: Option<PathBuf>,
    pub wordlist: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    pub dataset: Option<PathBuf>,
    pub pieces: Option<PathBuf>,
    pub boundary_marker: Option<String>,
    pub schemes: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub masking_config: Option<PathBuf>,
    pub wordlist: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub gold: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    pub instances: Option<usize>,
    pub max_d: Option<usize>,
    pub max_c: Option<usize>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub floor: Option<f64>,
    pub tolerance: Option<f64>,
    pub activation: Option<String>,
}

pub fn load(path: Option<&Path>) -> anyhow::Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
