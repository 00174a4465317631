//! Single-block prefix-tuned attention in double precision.
//!
//! Plain attention is `softmax(Q Kᵀ / √d) V` with a row-wise softmax. Prefix
//! tuning prepends `C` learned rows to the keys and values,
//! `K' = [h_K; K]`, `V' = [h_V; V]`, where each prefix comes from a two-layer
//! MLP over the rows of an embedding matrix `E`:
//! `h = W2 · f(W1 · e + b1) + b2`.

mod backward;
mod serial;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backward::{
    gradient_check, grads, Constant, GradCheckOptions, GradCheckReport, Loss, PrefixGrads, Quadratic, Weighted,
};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("bad tensor file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn dim_err(what: &str, expected: (usize, usize), got: (usize, usize)) -> AttentionError {
    AttentionError::Dimension(format!(
        "{what} is {}x{}, expected {}x{}",
        got.0, got.1, expected.0, expected.1
    ))
}

fn check_shape(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<(), AttentionError> {
    if m.shape() != (rows, cols) {
        return Err(dim_err(what, (rows, cols), m.shape()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInputs {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
}

impl AttentionInputs {
    pub fn new(q: Matrix, k: Matrix, v: Matrix) -> Result<Self, AttentionError> {
        let inputs = AttentionInputs { q, k, v };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn d(&self) -> usize {
        self.q.ncols()
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        let d = self.d();
        if d == 0 {
            return Err(AttentionError::Dimension("model dimension must be positive".into()));
        }
        check_shape("K", &self.k, self.k.nrows(), d)?;
        check_shape("V", &self.v, self.k.nrows(), d)
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn random<R: Rng>(n: usize, m: usize, d: usize, scale: f64, rng: &mut R) -> Self {
        AttentionInputs {
            q: random_matrix(n, d, scale, rng),
            k: random_matrix(m, d, scale, rng),
            v: random_matrix(m, d, scale, rng),
        }
    }
}

pub(crate) fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..=scale))
}

/// Weights and bias of one two-layer prefix MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Matrix,
    pub b2: Vector,
}

impl Mlp {
    pub fn zeros(d: usize) -> Self {
        Mlp {
            w1: Matrix::zeros(d, d),
            b1: Vector::zeros(d),
            w2: Matrix::zeros(d, d),
            b2: Vector::zeros(d),
        }
    }

    fn validate(&self, d: usize, name: &str) -> Result<(), AttentionError> {
        check_shape(&format!("W_{name}1"), &self.w1, d, d)?;
        check_shape(&format!("W_{name}2"), &self.w2, d, d)?;
        for (label, b) in [("1", &self.b1), ("2", &self.b2)] {
            if b.len() != d {
                return Err(AttentionError::Dimension(format!(
                    "b_{name}{label} has length {}, expected {d}",
                    b.len()
                )));
            }
        }
        Ok(())
    }

    /// Pre-activation `Z1 = E W1ᵀ + b1` (one row per prefix position).
    pub(crate) fn hidden_pre(&self, e: &Matrix) -> Matrix {
        let mut z = e * self.w1.transpose();
        for mut row in z.row_iter_mut() {
            row += self.b1.transpose();
        }
        z
    }

    /// Applies the MLP to every row of `e`.
    pub fn forward(&self, e: &Matrix, f: Activation) -> Matrix {
        let a = self.hidden_pre(e).map(|x| f.apply(x));
        let mut h = a * self.w2.transpose();
        for mut row in h.row_iter_mut() {
            row += self.b2.transpose();
        }
        h
    }
}

/// Trainable prefix parameters: separate key and value MLPs sharing the
/// `C×d` embedding matrix `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixParams {
    pub key: Mlp,
    pub value: Mlp,
    pub e: Matrix,
    pub activation: Activation,
}

impl PrefixParams {
    pub fn zeros(d: usize, c: usize) -> Self {
        PrefixParams {
            key: Mlp::zeros(d),
            value: Mlp::zeros(d),
            e: Matrix::zeros(c, d),
            activation: Activation::Tanh,
        }
    }

    pub fn random<R: Rng>(d: usize, c: usize, scale: f64, rng: &mut R) -> Self {
        let mut mlp = || Mlp {
            w1: random_matrix(d, d, scale, rng),
            b1: Vector::from_fn(d, |_, _| rng.gen_range(-scale..=scale)),
            w2: random_matrix(d, d, scale, rng),
            b2: Vector::from_fn(d, |_, _| rng.gen_range(-scale..=scale)),
        };
        let key = mlp();
        let value = mlp();
        PrefixParams {
            key,
            value,
            e: random_matrix(c, d, scale, rng),
            activation: Activation::Tanh,
        }
    }

    pub fn d(&self) -> usize {
        self.e.ncols()
    }

    /// Prefix length `C`.
    pub fn c(&self) -> usize {
        self.e.nrows()
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        let d = self.key.w1.nrows();
        if self.e.ncols() != d {
            return Err(dim_err("E", (self.e.nrows(), d), self.e.shape()));
        }
        self.key.validate(d, "K")?;
        self.value.validate(d, "V")
    }

    /// Number of scalar parameters.
    pub fn num_params(&self) -> usize {
        let d = self.d();
        2 * (2 * d * d + 2 * d) + self.c() * d
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(scores: &Matrix) -> Matrix {
    let mut p = scores.clone();
    for mut row in p.row_iter_mut() {
        let max = row.max();
        row.apply(|x| *x = (*x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    p
}

fn check_finite(what: &str, m: &Matrix) -> Result<(), AttentionError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(AttentionError::NonFinite(what.into()))
    }
}

/// Softmax weights `softmax(Q Kᵀ / √d)`, one row per query.
pub fn attention_weights(q: &Matrix, k: &Matrix) -> Matrix {
    let scale = (q.ncols() as f64).sqrt();
    softmax_rows(&((q * k.transpose()) / scale))
}

/// `softmax(Q Kᵀ / √d) V`.
pub fn attention(inp: &AttentionInputs) -> Result<Matrix, AttentionError> {
    inp.validate()?;
    if inp.k.nrows() == 0 {
        return Err(AttentionError::Dimension("attention needs at least one key".into()));
    }
    let out = attention_weights(&inp.q, &inp.k) * &inp.v;
    check_finite("attention output", &out)?;
    Ok(out)
}

/// Key and value prefixes `(h_K, h_V)`, each `C×d`.
pub fn prefix_vectors(p: &PrefixParams) -> Result<(Matrix, Matrix), AttentionError> {
    p.validate()?;
    Ok((p.key.forward(&p.e, p.activation), p.value.forward(&p.e, p.activation)))
}

/// Stacks `top` above `bottom`.
pub(crate) fn vstack(top: &Matrix, bottom: &Matrix) -> Matrix {
    let (c, m) = (top.nrows(), bottom.nrows());
    Matrix::from_fn(c + m, bottom.ncols(), |i, j| if i < c { top[(i, j)] } else { bottom[(i - c, j)] })
}

/// Extended keys and values `K' = [h_K; K]`, `V' = [h_V; V]`.
pub fn prefixed_kv(inp: &AttentionInputs, p: &PrefixParams) -> Result<(Matrix, Matrix), AttentionError> {
    inp.validate()?;
    let (hk, hv) = prefix_vectors(p)?;
    if p.d() != inp.d() {
        return Err(AttentionError::Dimension(format!(
            "prefix dimension {} does not match model dimension {}",
            p.d(),
            inp.d()
        )));
    }
    Ok((vstack(&hk, &inp.k), vstack(&hv, &inp.v)))
}

/// Attention over the prefixed keys and values. With `C = 0` this is
/// exactly [`attention`].
pub fn prefixed_attention(inp: &AttentionInputs, p: &PrefixParams) -> Result<Matrix, AttentionError> {
    let (k, v) = prefixed_kv(inp, p)?;
    attention(&AttentionInputs {
        q: inp.q.clone(),
        k,
        v,
    })
}

pub use serial::{read_params, write_params, ParamsFile, TensorEntry};
