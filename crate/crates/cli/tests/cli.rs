use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparql-vocab"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn preprocess(out: &Path, scheme: &str) -> Output {
    run(&[
        "preprocess",
        "--dataset",
        fixture("grailqa_sample.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--scheme",
        scheme,
        "--seed",
        "3",
    ])
}

#[test]
fn preprocess_exports_splits_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("char4");
    let o = preprocess(&out, "char4");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("40 records used (1 malformed, 0 rejected)"));
    for f in ["train.jsonl", "dev.jsonl", "test.jsonl", "masks.jsonl", "rejects.jsonl", "map.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scheme"], "char4");
    assert_eq!(manifest["reference_vocab_size"], 48);
    let total: u64 = ["train_n", "dev_n", "test_n"]
        .iter()
        .map(|k| manifest["split"][k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 40);

    // Same inputs, same bytes.
    let again = dir.path().join("again");
    assert!(preprocess(&again, "char4").status.success());
    for f in ["train.jsonl", "test.jsonl", "map.json", "manifest.json"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn evaluate_gold_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("char2");
    assert!(preprocess(&out, "char2").status.success());

    // Gold targets re-emitted as predictions, the way a training run would.
    let preds: String = std::fs::read_to_string(out.join("test.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            format!("{}\n", serde_json::json!({"id": v["id"], "prediction": v["target"]}))
        })
        .collect();
    let pred_path = dir.path().join("pred.jsonl");
    std::fs::write(&pred_path, preds).unwrap();
    let report_dir = dir.path().join("report");
    let o = run(&[
        "evaluate",
        "--gold",
        out.join("test.jsonl").to_str().unwrap(),
        "--predictions",
        pred_path.to_str().unwrap(),
        "--map",
        out.join("map.json").to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("100.00"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["exact_match_pct"], 100.0);
}

#[test]
fn evaluate_reports_schema_errors_as_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("orig");
    assert!(preprocess(&out, "original").status.success());
    let pred_path = dir.path().join("pred.jsonl");
    std::fs::write(&pred_path, "{\"id\": \"1\"}\n").unwrap();
    let o = run(&[
        "evaluate",
        "--gold",
        out.join("test.jsonl").to_str().unwrap(),
        "--predictions",
        pred_path.to_str().unwrap(),
        "--map",
        out.join("map.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":1:"));
}

#[test]
fn stats_table_with_piece_file() {
    let o = run(&[
        "stats",
        "--dataset",
        fixture("grailqa_sample.json").to_str().unwrap(),
        "--pieces",
        fixture("pieces_tiny.txt").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for scheme in ["char8", "char4", "char2", "char1", "dictionary", "original"] {
        assert!(text.contains(scheme), "{scheme} missing from\n{text}");
    }
    assert!(text.contains("TSVS") && text.contains("ALFL"));

    let o = run(&[
        "stats",
        "--dataset",
        fixture("grailqa_sample.json").to_str().unwrap(),
        "--boundary-marker",
        "none",
        "--schemes",
        "original,char1",
        "--json",
    ]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["stats"]["vocab_compression_ratio"], 1.0);
}

#[test]
fn classify_prints_the_class() {
    let gold = "SELECT ?x0 WHERE OB ?x0 rel0 ent0 . ?x0 rel1 ent1 . CB";
    let cases = [
        (gold, "correct"),
        ("SELECT ?x0 WHERE OB ?x0 rel1 ent0 . ?x0 rel0 ent1 . CB", "variable_placement"),
        ("SELECT ?x0 WHERE OB ?x0 rel0 ent0 . CB", "structural"),
        ("SELECT ?x0 WHERE OB ?x0 rel0 ent0 . ?x0 rel1 ent1 .", "syntax"),
        ("SELECT ?x0 WHERE { ?x0 rel0 ent0 . ?x0 rel1 ent1 . CB", "non_printable"),
    ];
    for (pred, expected) in cases {
        let o = run(&["classify", "--pred", pred, "--gold", gold]);
        assert!(o.status.success());
        assert_eq!(stdout(&o).trim(), expected, "{pred}");
    }
}

#[test]
fn gradcheck_passes_with_defaults() {
    let o = run(&["gradcheck", "--instances", "10", "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(summary["max_relative_deviation"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn config_file_supplies_options() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-config");
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "preprocess": {
                "dataset": fixture("grailqa_sample.json"),
                "out": out,
                "scheme": "dictionary",
                "split": [30, 5, 5]
            },
            "gradcheck": { "instances": 3, "max_d": 3, "max_c": 2 }
        })
        .to_string(),
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "preprocess"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("split 30/5/5"));
    let o = run(&["gradcheck", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"instances\": 3"));
}

#[test]
fn usage_errors_exit_2() {
    let missing = run(&["preprocess", "--dataset", "/no/such/file.json", "--out", "/tmp/x"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does not exist"));
    assert_eq!(run(&["preprocess", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let bad_scheme = run(&[
        "preprocess",
        "--dataset",
        fixture("grailqa_sample.json").to_str().unwrap(),
        "--out",
        "/tmp/x",
        "--scheme",
        "char3",
    ]);
    assert_eq!(bad_scheme.status.code(), Some(2));
}

#[test]
fn data_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = run(&["preprocess", "--dataset", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
