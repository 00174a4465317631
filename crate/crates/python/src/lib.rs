//! Python bindings.
//!
//! Token sequences cross the boundary as `list[str]`, matrices as
//! `list[list[float]]` (row-major) and structured results as objects or JSON.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparql_vocab::attention::{self, Activation, AttentionInputs, GradCheckOptions, Quadratic};
use sparql_vocab::eval::{self, ErrorClass};
use sparql_vocab::pipeline::{self, PreprocessConfig};
use sparql_vocab::substitution;
use sparql_vocab::subword;
use sparql_vocab::vocab::literal_census;
use sparql_vocab::wordlist::default_wordlist;
use sparql_vocab::{MaskingConfig, Scheme, TokenSequence, Vocabulary};

type Rows = Vec<Vec<f64>>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn tokens(words: Vec<String>) -> PyResult<TokenSequence> {
    TokenSequence::new(words).ok_or_else(|| PyValueError::new_err("tokens must be non-empty and contain no whitespace"))
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix".into());
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    to_matrix(&rows).map_err(PyValueError::new_err)
}

/// Normalized tokens of a SPARQL query.
#[pyfunction]
fn lex_sparql(query: &str) -> PyResult<Vec<String>> {
    sparql_vocab::lex_sparql(query).map(TokenSequence::into_vec).map_err(value_err)
}

#[pyclass(name = "MaskingResult", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMaskingResult {
    inner: sparql_vocab::MaskingResult,
}

#[pymethods]
impl PyMaskingResult {
    #[getter]
    fn masked(&self) -> Vec<String> {
        self.inner.masked.clone().into_vec()
    }

    #[getter]
    fn entity_map(&self) -> Vec<(String, String)> {
        self.inner.entity_map.iter().map(|(k, v)| (k, v.to_owned())).collect()
    }

    #[getter]
    fn relation_map(&self) -> Vec<(String, String)> {
        self.inner.relation_map.iter().map(|(k, v)| (k, v.to_owned())).collect()
    }

    fn demask(&self) -> PyResult<Vec<String>> {
        sparql_vocab::demask(&self.inner).map(TokenSequence::into_vec).map_err(value_err)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("masking result serializes")
    }

    fn __repr__(&self) -> String {
        format!("MaskingResult({:?})", self.inner.masked.join())
    }
}

/// Masks entities and relations. `config_json` overrides the default config.
#[pyfunction]
#[pyo3(signature = (tokens_in, config_json=None))]
fn mask(tokens_in: Vec<String>, config_json: Option<&str>) -> PyResult<PyMaskingResult> {
    let config = match config_json {
        Some(json) => MaskingConfig::from_json_str(json).map_err(value_err)?,
        None => MaskingConfig::default(),
    };
    let inner = sparql_vocab::mask(&tokens(tokens_in)?, &config).map_err(value_err)?;
    Ok(PyMaskingResult { inner })
}

/// Distinct non-literal tokens of a corpus, in first-occurrence order.
#[pyfunction]
fn extract_vocabulary(corpus: Vec<Vec<String>>) -> PyResult<Vec<String>> {
    let corpus = corpus.into_iter().map(tokens).collect::<PyResult<Vec<_>>>()?;
    Ok(sparql_vocab::extract_vocabulary(&corpus, "python").words().to_vec())
}

#[pyclass(name = "SubstitutionMap", frozen, skip_from_py_object)]
struct PySubstitutionMap {
    inner: substitution::SubstitutionMap,
}

#[pymethods]
impl PySubstitutionMap {
    /// Builds the map for `scheme` over `vocab`, avoiding `reserved` tokens.
    #[staticmethod]
    #[pyo3(signature = (scheme, vocab, seed, reserved=None, wordlist=None))]
    fn generate(
        scheme: &str,
        vocab: Vec<String>,
        seed: u64,
        reserved: Option<Vec<String>>,
        wordlist: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let scheme: Scheme = scheme.parse().map_err(value_err)?;
        let vocab = Vocabulary::from_words(vocab, "python");
        let reserved: BTreeSet<String> = reserved.unwrap_or_default().into_iter().collect();
        let wordlist = wordlist.unwrap_or_else(default_wordlist);
        let inner = substitution::generate(scheme, &vocab, seed, &reserved, Some(&wordlist)).map_err(value_err)?;
        Ok(PySubstitutionMap { inner })
    }

    /// Builds the map for a masked corpus, reserving its literals.
    #[staticmethod]
    fn for_corpus(scheme: &str, corpus: Vec<Vec<String>>, seed: u64) -> PyResult<Self> {
        let scheme: Scheme = scheme.parse().map_err(value_err)?;
        let corpus = corpus.into_iter().map(tokens).collect::<PyResult<Vec<_>>>()?;
        let vocab = sparql_vocab::extract_vocabulary(&corpus, "python");
        let inner = substitution::generate(scheme, &vocab, seed, &literal_census(&corpus), Some(&default_wordlist()))
            .map_err(value_err)?;
        Ok(PySubstitutionMap { inner })
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        substitution::SubstitutionMap::from_json_str(json)
            .map(|inner| PySubstitutionMap { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme().name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn forward(&self) -> Vec<(String, String)> {
        self.inner.forward().iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    fn substitute(&self, masked: Vec<String>) -> PyResult<Vec<String>> {
        Ok(self.inner.substitute(&tokens(masked)?).into_vec())
    }

    /// Returns `(tokens, unknown)`; `unknown` lists tokens with no inverse.
    fn desubstitute(&self, substituted: Vec<String>) -> PyResult<(Vec<String>, Vec<String>)> {
        let back = self.inner.desubstitute(&tokens(substituted)?);
        Ok((back.tokens.into_vec(), back.unknown))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "SubwordModel", frozen, skip_from_py_object)]
struct PySubwordModel {
    inner: subword::SubwordModel,
}

#[pymethods]
impl PySubwordModel {
    #[new]
    #[pyo3(signature = (pieces, unknown_piece="<unk>", boundary_marker=Some(subword::SENTENCEPIECE_MARKER.to_owned())))]
    fn new(pieces: Vec<String>, unknown_piece: &str, boundary_marker: Option<String>) -> Self {
        PySubwordModel {
            inner: subword::SubwordModel::new(pieces, unknown_piece, boundary_marker),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (path, boundary_marker=Some(subword::SENTENCEPIECE_MARKER.to_owned())))]
    fn from_piece_file(path: &str, boundary_marker: Option<String>) -> PyResult<Self> {
        subword::SubwordModel::from_piece_file(path, boundary_marker)
            .map(|inner| PySubwordModel { inner })
            .map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn segment(&self, word: &str) -> Vec<String> {
        self.inner.segment(word)
    }

    fn tsvs(&self, words: Vec<String>) -> usize {
        subword::tsvs_of_words(&self.inner, &words)
    }

    fn alfl(&self, corpus: Vec<Vec<String>>) -> PyResult<f64> {
        let corpus = corpus.into_iter().map(tokens).collect::<PyResult<Vec<_>>>()?;
        subword::alfl(&self.inner, &corpus).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// `(vocab_ratio, length_ratio)` of a new setting against the original.
#[pyfunction]
fn compression_ratios(orig_tsvs: usize, orig_alfl: f64, new_tsvs: usize, new_alfl: f64) -> PyResult<(f64, f64)> {
    subword::compression_ratios(orig_tsvs, orig_alfl, new_tsvs, new_alfl).map_err(value_err)
}

#[pyfunction]
fn exact_match(pred: &str, gold: &str) -> bool {
    eval::exact_match(pred, gold)
}

/// Error class name of a masked prediction against its gold query.
#[pyfunction]
fn classify_error(pred: &str, gold: &str) -> &'static str {
    eval::classify_error(&TokenSequence::from_whitespace(pred), &TokenSequence::from_whitespace(gold)).name()
}

#[pyfunction]
fn error_classes() -> Vec<&'static str> {
    ErrorClass::ALL.iter().map(|c| c.name()).collect()
}

/// Runs the preprocessing pipeline and returns the manifest as JSON.
#[pyfunction]
#[pyo3(signature = (dataset, out_dir, scheme="original", seed=0))]
fn preprocess(dataset: &str, out_dir: &str, scheme: &str, seed: u64) -> PyResult<String> {
    let config = PreprocessConfig {
        dataset: dataset.into(),
        out_dir: out_dir.into(),
        scheme: scheme.parse().map_err(value_err)?,
        seed,
        split: None,
        masking: MaskingConfig::default(),
        wordlist: None,
    };
    let manifest = pipeline::run_preprocess(&config).map_err(value_err)?;
    Ok(serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
}

#[pyclass(name = "PrefixParams", skip_from_py_object)]
struct PyPrefixParams {
    inner: attention::PrefixParams,
}

#[pymethods]
impl PyPrefixParams {
    #[staticmethod]
    fn zeros(d: usize, c: usize) -> Self {
        PyPrefixParams {
            inner: attention::PrefixParams::zeros(d, c),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (d, c, seed, scale=1.0))]
    fn random(d: usize, c: usize, seed: u64, scale: f64) -> Self {
        PyPrefixParams {
            inner: attention::PrefixParams::random(d, c, scale, &mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        attention::PrefixParams::from_json_str(json)
            .map(|inner| PyPrefixParams { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn c(&self) -> usize {
        self.inner.c()
    }

    #[setter]
    fn set_activation(&mut self, name: &str) -> PyResult<()> {
        self.inner.activation = match name {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "identity" => Activation::Identity,
            other => return Err(PyValueError::new_err(format!("unknown activation {other:?}"))),
        };
        Ok(())
    }

    /// `(h_K, h_V)`.
    fn prefix_vectors(&self) -> PyResult<(Rows, Rows)> {
        let (hk, hv) = attention::prefix_vectors(&self.inner).map_err(value_err)?;
        Ok((from_matrix(&hk), from_matrix(&hv)))
    }
}

fn inputs(q: Vec<Vec<f64>>, k: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> PyResult<AttentionInputs> {
    AttentionInputs::new(matrix(q)?, matrix(k)?, matrix(v)?).map_err(value_err)
}

/// `softmax(Q Kᵀ / √d) V`.
#[pyfunction(name = "attention")]
fn py_attention(q: Vec<Vec<f64>>, k: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let out = attention::attention(&inputs(q, k, v)?).map_err(value_err)?;
    Ok(from_matrix(&out))
}

#[pyfunction]
fn prefixed_attention(
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    params: PyRef<'_, PyPrefixParams>,
) -> PyResult<Vec<Vec<f64>>> {
    let out = attention::prefixed_attention(&inputs(q, k, v)?, &params.inner).map_err(value_err)?;
    Ok(from_matrix(&out))
}

/// Max relative deviation between analytic and finite-difference gradients
/// of `½‖O − target‖²`.
#[pyfunction]
#[pyo3(signature = (params, q, k, v, target, step=1e-5, floor=1e-6))]
fn gradient_check(
    params: PyRef<'_, PyPrefixParams>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    target: Vec<Vec<f64>>,
    step: f64,
    floor: f64,
) -> PyResult<f64> {
    let loss = Quadratic { target: matrix(target)? };
    attention::gradient_check(&params.inner, &inputs(q, k, v)?, &loss, GradCheckOptions { step, floor })
        .map(|r| r.max_relative_deviation)
        .map_err(value_err)
}

#[pymodule]
fn sparqlvocab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(lex_sparql, m)?)?;
    m.add_function(wrap_pyfunction!(mask, m)?)?;
    m.add_function(wrap_pyfunction!(extract_vocabulary, m)?)?;
    m.add_function(wrap_pyfunction!(compression_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(classify_error, m)?)?;
    m.add_function(wrap_pyfunction!(error_classes, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(py_attention, m)?)?;
    m.add_function(wrap_pyfunction!(prefixed_attention, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_class::<PyMaskingResult>()?;
    m.add_class::<PySubstitutionMap>()?;
    m.add_class::<PySubwordModel>()?;
    m.add_class::<PyPrefixParams>()?;
    m.add("SCHEMES", Scheme::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    Ok(())
}
