//! Hand-derived gradients of a scalar loss of the prefixed-attention output
//! with respect to every prefix parameter, and a finite-difference check.

use serde::{Deserialize, Serialize};

use super::{check_finite, prefixed_kv, softmax_rows, Activation, AttentionError, AttentionInputs, Matrix, Mlp, PrefixParams, Vector};

/// A scalar function of the `n×d` attention output.
pub trait Loss {
    fn value(&self, out: &Matrix) -> f64;
    fn grad(&self, out: &Matrix) -> Matrix;
}

/// `½ ‖O − T‖²`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub target: Matrix,
}

impl Loss for Quadratic {
    fn value(&self, out: &Matrix) -> f64 {
        0.5 * (out - &self.target).norm_squared()
    }

    fn grad(&self, out: &Matrix) -> Matrix {
        out - &self.target
    }
}

/// `Σ W ⊙ O`.
#[derive(Debug, Clone)]
pub struct Weighted {
    pub weights: Matrix,
}

impl Loss for Weighted {
    fn value(&self, out: &Matrix) -> f64 {
        self.weights.component_mul(out).sum()
    }

    fn grad(&self, _: &Matrix) -> Matrix {
        self.weights.clone()
    }
}

/// Ignores the output.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Loss for Constant {
    fn value(&self, _: &Matrix) -> f64 {
        self.0
    }

    fn grad(&self, out: &Matrix) -> Matrix {
        Matrix::zeros(out.nrows(), out.ncols())
    }
}

/// Gradients in the same layout as [`PrefixParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixGrads {
    pub key: Mlp,
    pub value: Mlp,
    pub e: Matrix,
}

impl PrefixGrads {
    pub fn max_abs(&self) -> f64 {
        tensors(&self.key, &self.value, &self.e)
            .into_iter()
            .flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>())
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }
}

fn column_sums(m: &Matrix) -> Vector {
    Vector::from_fn(m.ncols(), |j, _| m.column(j).sum())
}

// Backward through h = W2 f(W1 e + b1) + b2 (row-wise), given dL/dh.
fn mlp_backward(mlp: &Mlp, e: &Matrix, f: Activation, dh: &Matrix) -> (Mlp, Matrix) {
    let z1 = mlp.hidden_pre(e);
    let a1 = z1.map(|x| f.apply(x));
    let dz1 = (dh * &mlp.w2).component_mul(&z1.map(|x| f.derivative(x)));
    let grads = Mlp {
        w1: dz1.transpose() * e,
        b1: column_sums(&dz1),
        w2: dh.transpose() * &a1,
        b2: column_sums(dh),
    };
    let de = &dz1 * &mlp.w1;
    (grads, de)
}

/// Loss value and analytic gradients of `loss(prefixed_attention(inp, p))`.
pub fn grads(inp: &AttentionInputs, p: &PrefixParams, loss: &dyn Loss) -> Result<(f64, PrefixGrads), AttentionError> {
    let (k, v) = prefixed_kv(inp, p)?;
    let scale = (inp.d() as f64).sqrt();
    let weights = softmax_rows(&((&inp.q * k.transpose()) / scale));
    let out = &weights * &v;
    check_finite("attention output", &out)?;
    let value = loss.value(&out);
    let g = loss.grad(&out);
    check_finite("loss gradient", &g)?;

    let dv = weights.transpose() * &g;
    let dw = &g * v.transpose();
    let mut ds = dw.component_mul(&weights);
    for (mut row, w) in ds.row_iter_mut().zip(weights.row_iter()) {
        let inner = row.sum();
        row -= w * inner;
    }
    let dk = ds.transpose() * &inp.q / scale;

    let c = p.c();
    let dhk = dk.rows(0, c).into_owned();
    let dhv = dv.rows(0, c).into_owned();
    let (key, de_k) = mlp_backward(&p.key, &p.e, p.activation, &dhk);
    let (value_grads, de_v) = mlp_backward(&p.value, &p.e, p.activation, &dhv);
    let grads = PrefixGrads {
        key,
        value: value_grads,
        e: de_k + de_v,
    };
    for (name, t) in tensors(&grads.key, &grads.value, &grads.e) {
        check_finite(name, &t)?;
    }
    Ok((value, grads))
}

fn tensors(key: &Mlp, value: &Mlp, e: &Matrix) -> Vec<(&'static str, Matrix)> {
    let col = |v: &Vector| Matrix::from_column_slice(v.len(), 1, v.as_slice());
    vec![
        ("W_K1", key.w1.clone()),
        ("b_K1", col(&key.b1)),
        ("W_K2", key.w2.clone()),
        ("b_K2", col(&key.b2)),
        ("W_V1", value.w1.clone()),
        ("b_V1", col(&value.b1)),
        ("W_V2", value.w2.clone()),
        ("b_V2", col(&value.b2)),
        ("E", e.clone()),
    ]
}

fn tensor_mut<'a>(p: &'a mut PrefixParams, name: &str) -> &'a mut [f64] {
    match name {
        "W_K1" => p.key.w1.as_mut_slice(),
        "b_K1" => p.key.b1.as_mut_slice(),
        "W_K2" => p.key.w2.as_mut_slice(),
        "b_K2" => p.key.b2.as_mut_slice(),
        "W_V1" => p.value.w1.as_mut_slice(),
        "b_V1" => p.value.b1.as_mut_slice(),
        "W_V2" => p.value.w2.as_mut_slice(),
        "b_V2" => p.value.b2.as_mut_slice(),
        "E" => p.e.as_mut_slice(),
        _ => unreachable!("unknown tensor {name}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Lower bound on the denominator of the relative deviation, so that
    /// gradients that are zero on both sides compare as equal.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-5, floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_relative_deviation: f64,
    /// Per-tensor maxima, in parameter order.
    pub per_tensor: Vec<(String, f64)>,
    pub params_checked: usize,
}

/// Compares analytic gradients against central differences for every
/// scalar parameter.
pub fn gradient_check(
    p: &PrefixParams,
    inp: &AttentionInputs,
    loss: &dyn Loss,
    opts: GradCheckOptions,
) -> Result<GradCheckReport, AttentionError> {
    let (_, analytic) = grads(inp, p, loss)?;
    let eval = |q: &PrefixParams| -> Result<f64, AttentionError> {
        let (k, v) = prefixed_kv(inp, q)?;
        let out = super::attention_weights(&inp.q, &k) * v;
        let value = loss.value(&out);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(AttentionError::NonFinite("loss".into()))
        }
    };

    let mut work = p.clone();
    let mut per_tensor = Vec::new();
    let mut params_checked = 0;
    for (name, grad) in tensors(&analytic.key, &analytic.value, &analytic.e) {
        let mut worst: f64 = 0.0;
        for i in 0..grad.len() {
            let original = tensor_mut(&mut work, name)[i];
            tensor_mut(&mut work, name)[i] = original + opts.step;
            let plus = eval(&work)?;
            tensor_mut(&mut work, name)[i] = original - opts.step;
            let minus = eval(&work)?;
            tensor_mut(&mut work, name)[i] = original;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.as_slice()[i];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            worst = worst.max((a - numeric).abs() / denom);
            params_checked += 1;
        }
        per_tensor.push((name.to_owned(), worst));
    }
    let max_relative_deviation = per_tensor.iter().map(|(_, x)| *x).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_deviation,
        per_tensor,
        params_checked,
    })
}
