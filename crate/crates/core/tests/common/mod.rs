#![allow(dead_code)]

//! Test support: a deterministic GrailQA-format corpus generator, a
//! corruption generator with known labels, and loop-based numeric oracles
//! that share no code with the library.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sparql_vocab::eval::ErrorClass;

const PROLOGUE: &str = "PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>\n\
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n\
PREFIX : <http://rdf.freebase.com/ns/>\n\
PREFIX xsd: <http://www.w3.org/2001/XMLSchema#>\n";

const DOMAINS: &[&str] = &[
    "aviation", "music", "film", "sports", "location", "people", "book", "geography", "medicine", "computer",
];
const TYPES: &[&str] = &["airport", "album", "actor", "team", "country", "person", "author", "lake", "drug", "software"];
const PROPS: &[&str] = &["airport_type", "release_date", "genre", "founded", "area", "height", "publisher", "contains"];
const NAMES: &[&str] = &["Lake  Michigan", "Heathrow Airport", "The Beatles", "Paris", "Abbey Road"];

fn class(rng: &mut ChaCha8Rng) -> String {
    format!(":{}.{}", DOMAINS.choose(rng).unwrap(), TYPES.choose(rng).unwrap())
}

fn relation(rng: &mut ChaCha8Rng) -> String {
    format!(
        ":{}.{}.{}",
        DOMAINS.choose(rng).unwrap(),
        TYPES.choose(rng).unwrap(),
        PROPS.choose(rng).unwrap()
    )
}

fn entity(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[u8] = b"0123456789bcdfghjklmnpqrstvwxyz_";
    let len = rng.gen_range(3..=6);
    let id: String = (0..len).map(|_| *ALPHABET.choose(rng).unwrap() as char).collect();
    format!(":m.0{id}")
}

fn number(rng: &mut ChaCha8Rng) -> String {
    format!("{:.1}", rng.gen_range(0.0..5000.0))
}

/// One GrailQA-style SPARQL query with its prologue.
pub fn synthetic_query(rng: &mut ChaCha8Rng) -> String {
    let body = match rng.gen_range(0..7) {
        0 => format!(
            "SELECT DISTINCT ?x0  WHERE {{\n?x0 :type.object.type {} .\nVALUES ?x1 {{ {} }}\n?x0 {} ?x1 .\nFILTER ( ?x0 != ?x1  )\n}}",
            class(rng),
            entity(rng),
            relation(rng)
        ),
        1 => format!(
            "SELECT (COUNT(?x0) AS ?value) WHERE {{\nSELECT DISTINCT ?x0  WHERE {{\n?x0 :type.object.type {} .\nVALUES ?x1 {{ {} }}\n?x0 {} ?x1 .\nFILTER ( ?x0 != ?x1  )\n}}\n}}",
            class(rng),
            entity(rng),
            relation(rng)
        ),
        2 => format!(
            "SELECT DISTINCT ?x0  WHERE {{\n?x0 :type.object.type {} .\n?x0 {} ?x1 .\nFILTER ( ?x1 {} \"{}\"^^<http://www.w3.org/2001/XMLSchema#float> )\n}}",
            class(rng),
            relation(rng),
            ["<", ">", "<=", ">="].choose(rng).unwrap(),
            number(rng)
        ),
        3 => format!(
            "SELECT DISTINCT ?x0  WHERE {{\n?x0 :type.object.type {} .\nVALUES ?x2 {{ {} }}\n?x0 {} ?x1 .\n?x1 {} ?x2 .\nFILTER ( ?x0 != ?x1 && ?x0 != ?x2 && ?x1 != ?x2  )\n}}",
            class(rng),
            entity(rng),
            relation(rng),
            relation(rng)
        ),
        4 => format!(
            "SELECT (?x0 AS ?value) WHERE {{\nSELECT DISTINCT ?x0  WHERE {{\n?x1 :type.object.type {} .\n?x1 {} ?x0 .\n}}\nORDER BY DESC(xsd:float(?x0))\nLIMIT 1\n}}",
            class(rng),
            relation(rng)
        ),
        5 => format!(
            "SELECT DISTINCT ?x0  WHERE {{\n?x0 :type.object.type {} .\nVALUES ?x1 {{ \"{}\"@en }}\n?x0 {} ?x1 .\n}}",
            class(rng),
            NAMES.choose(rng).unwrap(),
            relation(rng)
        ),
        _ => format!(
            "SELECT DISTINCT ?x0  WHERE {{\n?x0 :type.object.type {} .\nVALUES ?x1 {{ {} }}\nVALUES ?x2 {{ {} }}\n?x0 {} ?x1 .\n?x0 {} ?x2 .\nFILTER ( ?x0 != ?x1 && ?x0 != ?x2  )\n}}",
            class(rng),
            entity(rng),
            entity(rng),
            relation(rng),
            relation(rng)
        ),
    };
    format!("{PROLOGUE}{body}")
}

/// A GrailQA-format JSON array of `n` synthetic questions.
pub fn synthetic_grailqa(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<_> = (0..n)
        .map(|i| {
            json!({
                "qid": 2_100_000_000_000u64 + i as u64,
                "question": format!("synthetic question number {i}?"),
                "answer": [],
                "function": "none",
                "sparql_query": synthetic_query(&mut rng),
            })
        })
        .collect();
    serde_json::to_string(&entries).unwrap()
}

/// A corrupted masked query and the class the evaluator should assign.
#[derive(Debug, Clone)]
pub struct Corruption {
    pub kind: &'static str,
    pub text: String,
    pub expected: ErrorClass,
    /// True if the corruption should still count as an exact match.
    pub exact: bool,
}

fn is_family(token: &str, prefix: &str) -> bool {
    token
        .strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Every corruption the generator can produce for this masked query, with
/// its label. Kinds that do not apply (no two placeholders of one family,
/// fewer than two triples in a group) are omitted.
pub fn corruptions(masked: &[String], rng: &mut ChaCha8Rng) -> Vec<Corruption> {
    let mut out = Vec::new();

    // Whitespace-only edits.
    let mut text = String::new();
    for (i, t) in masked.iter().enumerate() {
        if i > 0 {
            text.push_str([" ", "  ", "\t", "\n  "].choose(rng).unwrap());
        }
        text.push_str(t);
    }
    out.push(Corruption {
        kind: "whitespace",
        text: format!(" {text}\n"),
        expected: ErrorClass::Correct,
        exact: true,
    });

    // Consistent swap of two placeholders of one family.
    for prefix in ["ent", "rel"] {
        let mut distinct: Vec<&String> = Vec::new();
        for t in masked.iter().filter(|t| is_family(t, prefix)) {
            if !distinct.contains(&t) {
                distinct.push(t);
            }
        }
        if distinct.len() >= 2 {
            let (a, b) = (distinct[0].clone(), distinct[1].clone());
            let swapped: Vec<String> = masked
                .iter()
                .map(|t| if *t == a { b.clone() } else if *t == b { a.clone() } else { t.clone() })
                .collect();
            out.push(Corruption {
                kind: "placeholder_swap",
                text: swapped.join(" "),
                expected: ErrorClass::VariablePlacement,
                exact: false,
            });
        }
    }

    // Delete one `s p o .` triple from a group that has more than one.
    let triples: Vec<usize> = (3..masked.len())
        .filter(|&i| masked[i] == "." && masked[i - 3].starts_with('?'))
        .collect();
    if triples.len() >= 2 {
        let end = *triples.choose(rng).unwrap();
        let mut deleted = masked.to_vec();
        deleted.drain(end - 3..=end);
        out.push(Corruption {
            kind: "deleted_triple",
            text: deleted.join(" "),
            expected: ErrorClass::Structural,
            exact: false,
        });
    }

    // Drop the final close brace.
    if let Some(pos) = masked.iter().rposition(|t| t == "CB") {
        let mut unbalanced = masked.to_vec();
        unbalanced.remove(pos);
        out.push(Corruption {
            kind: "unbalanced",
            text: unbalanced.join(" "),
            expected: ErrorClass::Syntax,
            exact: false,
        });
    }

    // A raw brace where an alias belongs.
    let positions: Vec<usize> = (0..masked.len()).filter(|&i| masked[i] == "OB").collect();
    if let Some(&pos) = positions.choose(rng) {
        let mut injected = masked.to_vec();
        injected[pos] = "{".into();
        out.push(Corruption {
            kind: "injected_brace",
            text: injected.join(" "),
            expected: ErrorClass::NonPrintable,
            exact: false,
        });
    }
    out
}

// ---- numeric oracles (plain nested loops over Vec<Vec<f64>>) ----

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(m: &nalgebra::DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn oracle_attention(q: &Mat, k: &Mat, v: &Mat) -> Mat {
    let d = q[0].len() as f64;
    q.iter()
        .map(|qi| {
            let scores: Vec<f64> = k
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / d.sqrt())
                .collect();
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
            let z: f64 = exps.iter().sum();
            (0..v[0].len())
                .map(|c| exps.iter().zip(v).map(|(e, vj)| e / z * vj[c]).sum())
                .collect()
        })
        .collect()
}

/// `h_i = W2 f(W1 e_i + b1) + b2` for each row `e_i`.
pub fn oracle_mlp(e: &Mat, w1: &Mat, b1: &[f64], w2: &Mat, b2: &[f64], f: fn(f64) -> f64) -> Mat {
    e.iter()
        .map(|row| {
            let hidden: Vec<f64> = (0..w1.len())
                .map(|i| f((0..row.len()).map(|j| w1[i][j] * row[j]).sum::<f64>() + b1[i]))
                .collect();
            (0..w2.len())
                .map(|i| (0..hidden.len()).map(|j| w2[i][j] * hidden[j]).sum::<f64>() + b2[i])
                .collect()
        })
        .collect()
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}
