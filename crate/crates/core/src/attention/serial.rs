//! JSON tensor container for [`PrefixParams`]: a shape header (`d`, `C`)
//! and named row-major tensors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, AttentionError, Matrix, Mlp, PrefixParams, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub d: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(default)]
    pub activation: Activation,
    pub tensors: BTreeMap<String, TensorEntry>,
}

fn matrix_entry(m: &Matrix) -> TensorEntry {
    TensorEntry {
        shape: vec![m.nrows(), m.ncols()],
        data: m.transpose().as_slice().to_vec(),
    }
}

fn vector_entry(v: &Vector) -> TensorEntry {
    TensorEntry {
        shape: vec![v.len()],
        data: v.as_slice().to_vec(),
    }
}

impl From<&PrefixParams> for ParamsFile {
    fn from(p: &PrefixParams) -> Self {
        let mut tensors = BTreeMap::new();
        for (tag, mlp) in [("K", &p.key), ("V", &p.value)] {
            tensors.insert(format!("W_{tag}1"), matrix_entry(&mlp.w1));
            tensors.insert(format!("b_{tag}1"), vector_entry(&mlp.b1));
            tensors.insert(format!("W_{tag}2"), matrix_entry(&mlp.w2));
            tensors.insert(format!("b_{tag}2"), vector_entry(&mlp.b2));
        }
        tensors.insert("E".into(), matrix_entry(&p.e));
        ParamsFile {
            d: p.d(),
            c: p.c(),
            activation: p.activation,
            tensors,
        }
    }
}

impl ParamsFile {
    fn take(&self, name: &str, shape: &[usize]) -> Result<&[f64], AttentionError> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| AttentionError::Format(format!("missing tensor {name}")))?;
        if t.shape != shape {
            return Err(AttentionError::Dimension(format!(
                "{name} has shape {:?}, header says {shape:?}",
                t.shape
            )));
        }
        if t.data.len() != shape.iter().product::<usize>() {
            return Err(AttentionError::Format(format!(
                "{name} holds {} values for shape {shape:?}",
                t.data.len()
            )));
        }
        Ok(&t.data)
    }

    pub fn to_params(&self) -> Result<PrefixParams, AttentionError> {
        let (d, c) = (self.d, self.c);
        if d == 0 {
            return Err(AttentionError::Dimension("d must be positive".into()));
        }
        if let Some(extra) = self.tensors.keys().find(|k| {
            !matches!(
                k.as_str(),
                "W_K1" | "b_K1" | "W_K2" | "b_K2" | "W_V1" | "b_V1" | "W_V2" | "b_V2" | "E"
            )
        }) {
            return Err(AttentionError::Format(format!("unexpected tensor {extra}")));
        }
        let mlp = |tag: &str| -> Result<Mlp, AttentionError> {
            Ok(Mlp {
                w1: Matrix::from_row_slice(d, d, self.take(&format!("W_{tag}1"), &[d, d])?),
                b1: Vector::from_column_slice(self.take(&format!("b_{tag}1"), &[d])?),
                w2: Matrix::from_row_slice(d, d, self.take(&format!("W_{tag}2"), &[d, d])?),
                b2: Vector::from_column_slice(self.take(&format!("b_{tag}2"), &[d])?),
            })
        };
        Ok(PrefixParams {
            key: mlp("K")?,
            value: mlp("V")?,
            e: Matrix::from_row_slice(c, d, self.take("E", &[c, d])?),
            activation: self.activation,
        })
    }
}

pub fn write_params(p: &PrefixParams) -> String {
    serde_json::to_string_pretty(&ParamsFile::from(p)).expect("params serialize")
}

pub fn read_params(json: &str) -> Result<PrefixParams, AttentionError> {
    serde_json::from_str::<ParamsFile>(json)?.to_params()
}

impl PrefixParams {
    pub fn to_json(&self) -> String {
        write_params(self)
    }

    pub fn from_json_str(json: &str) -> Result<Self, AttentionError> {
        read_params(json)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, AttentionError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| AttentionError::Format(format!("{}: {e}", path.as_ref().display())))?;
        read_params(&text)
    }
}
