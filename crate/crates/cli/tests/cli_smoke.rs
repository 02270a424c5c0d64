//! End-to-end command-line pipeline on a tiny synthetic benchmark:
//! registry -> mark -> vocab -> train -> evaluate, plus generate/attribute/
//! attack/baseline/provenance, exit codes, and byte-identical reruns.

use std::path::Path;
use std::process::{Command, Output};

fn wasa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wasa"))
        .current_dir(dir)
        .env_remove("WASA_SEED")
        .args(args)
        .output()
        .expect("spawn wasa")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = wasa(dir, args);
    assert!(
        out.status.success(),
        "wasa {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn full_pipeline_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    ok(
        dir,
        &[
            "synthbench", "--providers", "3", "--holdout", "1", "--docs", "40", "--sentences",
            "3", "--eval-docs", "4", "--out", "bench", "--seed", "7",
        ],
    );
    assert!(dir.join("bench/train/provider-00").is_dir());
    assert!(dir.join("bench/holdout/provider-03").is_dir());
    assert!(dir.join("bench/lexicon.tsv").is_file());

    ok(
        dir,
        &[
            "registry", "--corpus", "bench/train", "--registry", "registry.json", "--seed", "7",
        ],
    );
    let registry_text = std::fs::read_to_string(dir.join("registry.json")).unwrap();
    assert!(registry_text.contains("U+200B"), "codes are escaped, never raw");

    ok(
        dir,
        &[
            "mark", "--corpus", "bench/train", "--registry", "registry.json", "--fraction",
            "0.4", "--strategy", "tfidf", "--out", "marked", "--seed", "7",
        ],
    );
    assert!(dir.join("marked/manifest.jsonl").is_file());

    ok(
        dir,
        &[
            "vocab", "--corpus", "marked", "--registry", "registry.json", "--target-v", "512",
            "--out", "vocab.json",
        ],
    );

    ok(
        dir,
        &[
            "train", "--corpus", "marked", "--vocab", "vocab.json", "--out", "model.wasa",
            "--learning-rate", "2e-3", "--epochs", "2", "--batch-size", "2", "--block-size",
            "128", "--log", "train.jsonl", "--seed", "7",
        ],
    );
    assert!(dir.join("model.wasa").is_file());
    assert!(dir.join("train.jsonl").is_file());

    // evaluation protocol on a small trial budget
    ok(
        dir,
        &[
            "evaluate", "--marked", "marked", "--checkpoint", "model.wasa", "--vocab",
            "vocab.json", "--registry", "registry.json", "--trials", "5", "--prompt-chars",
            "120", "--gen-tokens", "30", "--k", "1,3", "--out", "report.json", "--seed", "7",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["k_list"], serde_json::json!([1, 3]));
    assert_eq!(report["providers"].as_array().unwrap().len(), 3);

    // rerun with identical args and seed: byte-identical report
    let before = std::fs::read(dir.join("report.json")).unwrap();
    ok(
        dir,
        &[
            "evaluate", "--marked", "marked", "--checkpoint", "model.wasa", "--vocab",
            "vocab.json", "--registry", "registry.json", "--trials", "5", "--prompt-chars",
            "120", "--gen-tokens", "30", "--k", "1,3", "--out", "report.json", "--seed", "7",
        ],
    );
    assert_eq!(before, std::fs::read(dir.join("report.json")).unwrap());

    // generation: JSON output renders codepoints as escapes
    let out = ok(
        dir,
        &[
            "generate", "--checkpoint", "model.wasa", "--vocab", "vocab.json", "--registry",
            "registry.json", "--prompt", "a short prompt", "--max-new-tokens", "20", "--seed",
            "9",
        ],
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(!stdout.contains('\u{200B}'), "no raw invisibles on stdout");
    let gen: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(gen.get("text").is_some() && gen.get("forced").is_some());

    // raw output goes to a file for the attack/attribute pipeline
    ok(
        dir,
        &[
            "generate", "--checkpoint", "model.wasa", "--vocab", "vocab.json", "--registry",
            "registry.json", "--prompt", "a short prompt", "--max-new-tokens", "20", "--seed",
            "9", "--raw", "--out", "gen.txt",
        ],
    );

    // attribute with enforcement always yields a decision object
    let out = ok(
        dir,
        &[
            "attribute", "--checkpoint", "model.wasa", "--vocab", "vocab.json", "--registry",
            "registry.json", "--text", "gen.txt", "--enforce",
        ],
    );
    let att: serde_json::Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(att.get("provider").is_some());
    assert!(att["watermarks"].as_array().map_or(false, |w| !w.is_empty()));

    // attack the generated file, then attribute the attacked version
    ok(
        dir,
        &[
            "attack", "--in", "gen.txt", "--out", "attacked.txt", "--attack",
            r#"{"target":"generated_text","family":"word","mode":"delete","strength":0.2,"seed":3}"#,
        ],
    );
    ok(
        dir,
        &[
            "attribute", "--checkpoint", "model.wasa", "--vocab", "vocab.json", "--registry",
            "registry.json", "--text", "attacked.txt", "--enforce",
        ],
    );

    // BM25 baseline
    ok(dir, &["baseline", "build", "--corpus", "bench/train", "--out", "index.json"]);
    let out = ok(
        dir,
        &["baseline", "query", "--index", "index.json", "--text", "gen.txt", "--k", "2"],
    );
    let ranked: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(ranked.as_array().unwrap().len(), 2);

    // provenance over train + holdout providers
    let out = ok(
        dir,
        &[
            "provenance", "--checkpoint", "model.wasa", "--vocab", "vocab.json", "--registry",
            "registry.json", "--corpus", "bench/train", "--max-texts", "3",
        ],
    );
    let rows: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);

    // exit code 1: usage error (bad strategy flag value)
    let out = wasa(
        dir,
        &[
            "mark", "--corpus", "bench/train", "--registry", "registry.json", "--strategy",
            "sideways", "--out", "marked2",
        ],
    );
    assert_eq!(out.status.code(), Some(1), "usage error");

    // exit code 2: data error (missing corpus)
    let out = wasa(
        dir,
        &[
            "mark", "--corpus", "no-such-dir", "--registry", "registry.json", "--out", "marked2",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "data error");
}

#[test]
fn registry_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["registry", "--names", "alpha,beta,gamma", "--registry", "a.json", "--seed", "11"]);
    ok(dir, &["registry", "--names", "alpha,beta,gamma", "--registry", "b.json", "--seed", "11"]);
    let a = std::fs::read(dir.join("a.json")).unwrap();
    let b = std::fs::read(dir.join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("wasa.toml"),
        "seed = 5\n[selection]\nfraction = 0.5\n",
    )
    .unwrap();
    ok(
        dir,
        &[
            "synthbench", "--providers", "2", "--docs", "10", "--sentences", "2", "--eval-docs",
            "1", "--out", "bench", "--seed", "5",
        ],
    );
    ok(dir, &["registry", "--corpus", "bench/train", "--registry", "registry.json", "--seed", "5"]);
    // fraction comes from the config file here
    ok(
        dir,
        &[
            "--config", "wasa.toml", "mark", "--corpus", "bench/train", "--registry",
            "registry.json", "--out", "m-config",
        ],
    );
    // and is overridden by the flag here
    ok(
        dir,
        &[
            "--config", "wasa.toml", "mark", "--corpus", "bench/train", "--registry",
            "registry.json", "--fraction", "1.0", "--out", "m-flag",
        ],
    );
    let count = |p: &str| {
        std::fs::read_to_string(dir.join(p).join("manifest.jsonl"))
            .unwrap()
            .lines()
            .count()
    };
    let with_config = count("m-config");
    let with_flag = count("m-flag");
    assert!(with_flag > with_config, "flag must override the config file");
}
