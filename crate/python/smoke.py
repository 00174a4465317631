"""Smoke test for the Python extension.

    maturin develop -m crates/python/Cargo.toml
    python python/smoke.py
"""

import json
import math
import os
import random
import tempfile

import sparqlvocab as sv

HERE = os.path.dirname(os.path.abspath(__file__))
SAMPLE = os.path.join(HERE, "..", "crates", "cli", "tests", "fixtures", "grailqa_sample.json")

QUERY = """PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX : <http://rdf.freebase.com/ns/>
SELECT (?x0 AS ?value) WHERE {
SELECT DISTINCT ?x0 WHERE {
?x0 :type.object.type :aviation.airport .
VALUES ?x1 { :m.0fbp5k }
?x0 :aviation.airport.serves ?x1 .
FILTER ( ?x0 != ?x1 )
}
}"""


def check_masking():
    tokens = sv.lex_sparql(QUERY)
    body = tokens[tokens.index("SELECT"):]
    result = sv.mask(body)
    assert "ent0" in result.masked and "rel0" in result.masked, result.masked
    assert "OB" in result.masked and "{" not in result.masked
    assert result.demask() == body
    assert json.loads(result.to_json())["masked"] == result.masked
    return result.masked


def check_substitution(masked):
    for scheme in sv.SCHEMES:
        m = sv.SubstitutionMap.for_corpus(scheme, [masked], 7)
        out = m.substitute(masked)
        assert len(out) == len(masked)
        back, unknown = m.desubstitute(out)
        assert back == masked and not unknown, scheme
        again = sv.SubstitutionMap.from_json(m.to_json())
        assert again.forward() == m.forward()
    vocab = sv.extract_vocabulary([masked])
    assert "SELECT" in vocab


def check_eval(masked):
    gold = " ".join(masked)
    assert sv.exact_match(gold.replace(" ", "  "), gold)
    assert sv.classify_error(gold, gold) == "correct"
    assert sv.classify_error(gold.replace("OB", "{", 1), gold) == "non_printable"
    assert set(sv.error_classes()) >= {"syntax", "structural", "intent"}


def check_subword():
    model = sv.SubwordModel(["▁S", "E", "L", "C", "T", "▁SELECT"])
    assert model.segment("SELECT") == ["▁SELECT"]
    assert model.tsvs(["SELECT"]) == 1
    vr, lr = sv.compression_ratios(10, 4.0, 5, 8.0)
    assert math.isclose(vr, 0.5) and math.isclose(lr, 2.0)


def rand_matrix(rng, n, d):
    return [[rng.uniform(-1, 1) for _ in range(d)] for _ in range(n)]


def check_attention():
    rng = random.Random(3)
    d = 4
    q, k, v = rand_matrix(rng, 2, d), rand_matrix(rng, 3, d), rand_matrix(rng, 3, d)
    plain = sv.attention(q, k, v)
    assert len(plain) == 2 and len(plain[0]) == d
    params = sv.PrefixParams.random(d, 3, 11)
    out = sv.prefixed_attention(q, k, v, params)
    assert len(out) == 2
    hk, hv = params.prefix_vectors()
    assert len(hk) == 3 and len(hv[0]) == d
    zero = sv.PrefixParams.zeros(d, 0)
    assert all(math.isclose(a, b) for ra, rb in zip(sv.prefixed_attention(q, k, v, zero), plain) for a, b in zip(ra, rb))
    dev = sv.gradient_check(params, q, k, v, rand_matrix(rng, 2, d))
    assert dev <= 1e-4, dev
    assert sv.PrefixParams.from_json(params.to_json()).to_json() == params.to_json()


def check_preprocess():
    with tempfile.TemporaryDirectory() as out:
        manifest = json.loads(sv.preprocess(SAMPLE, out, "char2", 1))
        assert manifest["scheme"] == "char2"
        with open(os.path.join(out, "train.jsonl")) as f:
            row = json.loads(f.readline())
        assert set(row) == {"id", "input", "target"}


def main():
    masked = check_masking()
    check_substitution(masked)
    check_eval(masked)
    check_subword()
    check_attention()
    check_preprocess()
    print("smoke ok")


if __name__ == "__main__":
    main()
