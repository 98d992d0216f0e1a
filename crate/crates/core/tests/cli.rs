use std::path::Path;
use std::process::{Command, Output};

fn aggro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggro"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = aggro(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) -> (String, String, String) {
    let d = dir.to_str().unwrap();
    ok(&["synth", "--n", "400", "--seed", "3", "--out-dir", d]);
    let p = |f: &str| dir.join(f).to_str().unwrap().to_string();
    (p("synth.tsv"), p("vectors.txt"), p("lexicon.txt"))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (data, vectors, lexicon) = synth(dir.path());
    for classifier in ["forest", "word_cnn"] {
        let model = dir.path().join(format!("{classifier}.model"));
        let train_metrics = dir.path().join(format!("{classifier}.train.json"));
        let eval_metrics = dir.path().join(format!("{classifier}.eval.json"));
        ok(&[
            "train",
            "--classifier",
            classifier,
            "--dataset",
            &data,
            "--format",
            "tagged",
            "--embeddings",
            &vectors,
            "--lexicon",
            &lexicon,
            "--set",
            "forest.n_trees=20",
            "--set",
            "cnn.epochs=3",
            "--model-out",
            model.to_str().unwrap(),
            "--out",
            train_metrics.to_str().unwrap(),
        ]);
        ok(&[
            "eval",
            "--model",
            model.to_str().unwrap(),
            "--dataset",
            &data,
            "--format",
            "tagged",
            "--out",
            eval_metrics.to_str().unwrap(),
        ]);
        let t = json(&train_metrics);
        let e = json(&eval_metrics);
        assert_eq!(t["fingerprint"], e["fingerprint"]);
        assert_eq!(t["classifier"], classifier);
        assert_eq!(e["n_eval"], 400);

        let out = ok(&[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--text",
            "grr001 grr002 grr003 grr004 grr005",
        ]);
        let line = out.lines().next().unwrap();
        assert!(line.starts_with('1'), "{line}");
        if classifier == "forest" {
            assert!(line.contains("votes="), "{line}");
        } else {
            assert!(line.contains("p="), "{line}");
        }
    }
}

#[test]
fn repeated_training_writes_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (data, vectors, lexicon) = synth(dir.path());
    let mut texts = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("m{i}.json"));
        ok(&[
            "train",
            "--classifier",
            "combined",
            "--dataset",
            &data,
            "--format",
            "tagged",
            "--embeddings",
            &vectors,
            "--lexicon",
            &lexicon,
            "--set",
            "cnn.epochs=2",
            "--out",
            out.to_str().unwrap(),
        ]);
        texts.push(std::fs::read(out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let (data, vectors, _) = synth(dir.path());
    let out = aggro(&[
        "train",
        "--classifier",
        "forest",
        "--dataset",
        &data,
        "--format",
        "tagged",
        "--embeddings",
        &vectors,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lexicon"));

    let missing = dir.path().join("nope.tsv");
    let out = aggro(&["stats", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(aggro(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        aggro(&["train", "--classifier", "svm"]).status.code(),
        Some(2)
    );
}

#[test]
fn eval_rejects_unsupported_or_stale_models() {
    let dir = tempfile::tempdir().unwrap();
    let (data, vectors, lexicon) = synth(dir.path());
    let model = dir.path().join("f.model");
    ok(&[
        "train",
        "--classifier",
        "forest",
        "--dataset",
        &data,
        "--format",
        "tagged",
        "--embeddings",
        &vectors,
        "--lexicon",
        &lexicon,
        "--set",
        "forest.n_trees=5",
        "--model-out",
        model.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&model).unwrap();
    std::fs::write(&model, text.replacen("\"version\":1", "\"version\":9", 1)).unwrap();
    let out = aggro(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        &data,
        "--format",
        "tagged",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported version 9"));

    std::fs::write(&lexicon, "grr000\ngrr001\n").unwrap();
    std::fs::write(&model, &text).unwrap();
    let out = aggro(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        &data,
        "--format",
        "tagged",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint mismatch"));
}

#[test]
fn stats_prints_the_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let (data, vectors, _) = synth(dir.path());
    let out = ok(&[
        "stats",
        "--dataset",
        &data,
        "--format",
        "tagged",
        "--embeddings",
        &vectors,
    ]);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("dataset & classes"));
    let row: Vec<&str> = lines.next().unwrap().split(" & ").collect();
    assert_eq!(row[1], "2");
    assert_eq!(row[3], "400");
}
