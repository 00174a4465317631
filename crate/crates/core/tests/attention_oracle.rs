mod common;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparql_vocab::attention::{
    attention, grads, prefix_vectors, prefixed_attention, AttentionInputs, Matrix, PrefixParams, Quadratic,
};

use common::{max_abs_diff, oracle_attention, oracle_mlp, to_mat};

#[test]
fn random_attention_matches_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let inp = AttentionInputs::random(3, 3, 2, 2.0, &mut rng);
    let out = attention(&inp).unwrap();
    let expected = oracle_attention(&to_mat(&inp.q), &to_mat(&inp.k), &to_mat(&inp.v));
    assert!(max_abs_diff(&to_mat(&out), &expected) <= 1e-12);
}

#[test]
fn prefix_mlp_matches_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let p = PrefixParams::random(3, 2, 1.0, &mut rng);
    let (hk, hv) = prefix_vectors(&p).unwrap();
    let e = to_mat(&p.e);
    for (h, mlp) in [(hk, &p.key), (hv, &p.value)] {
        let expected = oracle_mlp(&e, &to_mat(&mlp.w1), mlp.b1.as_slice(), &to_mat(&mlp.w2), mlp.b2.as_slice(), f64::tanh);
        assert_eq!(h.shape(), (2, 3));
        assert!(max_abs_diff(&to_mat(&h), &expected) <= 1e-12);
    }
}

#[test]
fn prefixed_attention_matches_loops_on_concatenation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inp = AttentionInputs::random(2, 3, 4, 1.0, &mut rng);
    let p = PrefixParams::random(4, 5, 1.0, &mut rng);
    let (hk, hv) = prefix_vectors(&p).unwrap();
    let mut k = to_mat(&hk);
    k.extend(to_mat(&inp.k));
    let mut v = to_mat(&hv);
    v.extend(to_mat(&inp.v));
    let expected = oracle_attention(&to_mat(&inp.q), &k, &v);
    assert!(max_abs_diff(&to_mat(&prefixed_attention(&inp, &p).unwrap()), &expected) <= 1e-12);
}

// Finite differences computed entirely through the loop oracles.
#[test]
fn embedding_gradient_matches_oracle_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let inp = AttentionInputs::random(2, 2, 3, 1.0, &mut rng);
    let p = PrefixParams::random(3, 2, 1.0, &mut rng);
    let target = DMatrix::from_fn(2, 3, |i, j| (i + j) as f64 * 0.1);
    let (_, analytic) = grads(&inp, &p, &Quadratic { target: target.clone() }).unwrap();

    let loss = |e: &Matrix| -> f64 {
        let e = to_mat(e);
        let hk = oracle_mlp(&e, &to_mat(&p.key.w1), p.key.b1.as_slice(), &to_mat(&p.key.w2), p.key.b2.as_slice(), f64::tanh);
        let hv = oracle_mlp(&e, &to_mat(&p.value.w1), p.value.b1.as_slice(), &to_mat(&p.value.w2), p.value.b2.as_slice(), f64::tanh);
        let k: Vec<Vec<f64>> = hk.into_iter().chain(to_mat(&inp.k)).collect();
        let v: Vec<Vec<f64>> = hv.into_iter().chain(to_mat(&inp.v)).collect();
        let out = oracle_attention(&to_mat(&inp.q), &k, &v);
        let t = to_mat(&target);
        0.5 * out.iter().zip(&t).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2))).sum::<f64>()
    };
    let h = 1e-6;
    for i in 0..2 {
        for j in 0..3 {
            let mut plus = p.e.clone();
            plus[(i, j)] += h;
            let mut minus = p.e.clone();
            minus[(i, j)] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((numeric - analytic.e[(i, j)]).abs() <= 1e-7, "dE[{i},{j}]");
        }
    }
}
