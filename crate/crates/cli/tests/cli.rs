//! End-to-end tests of the `mallet` binary: command wiring, file outputs,
//! exit codes, and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mallet_core::conflict::normalized_key;
use mallet_core::hashes::{sha256, Hash256};
use mallet_core::tx::deserialize_tx;

fn mallet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mallet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn gen_demo(dir: &Path, seed: &str, corpus: &str, manifest: &str) {
    let out = mallet(
        &[
            "gen-corpus",
            "--seed",
            seed,
            "--out",
            corpus,
            "--manifest",
            manifest,
        ],
        dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn gen_corpus_is_deterministic_and_hashes_check_out() {
    let dir = tempfile::tempdir().unwrap();
    gen_demo(dir.path(), "1", "a.jsonl", "a.json");
    gen_demo(dir.path(), "1", "b.jsonl", "b.json");
    gen_demo(dir.path(), "2", "c.jsonl", "c.json");

    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b.jsonl")).unwrap();
    let c = fs::read(dir.path().join("c.jsonl")).unwrap();
    assert_eq!(a, b, "same seed must be byte-identical");
    assert_ne!(a, c);
    assert_eq!(
        fs::read(dir.path().join("a.json")).unwrap(),
        fs::read(dir.path().join("b.json")).unwrap()
    );

    // First record: its txid equals an independent double-SHA256 of the
    // serialized bytes.
    let first_line = String::from_utf8(a)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let parsed: serde_json::Value = serde_json::from_str(&first_line).unwrap();
    let bytes = hex::decode(parsed["hex"].as_str().unwrap()).unwrap();
    let tx = deserialize_tx(&bytes).unwrap();
    assert_eq!(tx.txid(), Hash256(sha256(&sha256(&bytes))));
}

#[test]
fn analyze_writes_all_reports_and_recovers_the_demo_plan() {
    let dir = tempfile::tempdir().unwrap();
    gen_demo(dir.path(), "5", "corpus.jsonl", "manifest.json");

    let out = mallet(
        &["analyze", "--corpus", "corpus.jsonl", "--out", "reports"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    for file in [
        "conflict_sets.json",
        "period_report.json",
        "period_report.csv",
        "cumulative.csv",
        "hourly.csv",
    ] {
        assert!(dir.path().join("reports").join(file).exists(), "{file}");
    }

    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("reports/period_report.json")).unwrap(),
    )
    .unwrap();
    let p1 = &report["periods"][0];
    assert_eq!(p1["attack_sets"], 4);
    assert_eq!(p1["re_sign_sets"], 2);
    assert_eq!(p1["total_value_btc"], "10.00000000");

    let sets: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("reports/conflict_sets.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sets.as_array().unwrap().len(), 6);

    // Repeated analysis produces byte-identical reports.
    let out = mallet(
        &["analyze", "--corpus", "corpus.jsonl", "--out", "reports2"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(
        fs::read(dir.path().join("reports/period_report.csv")).unwrap(),
        fs::read(dir.path().join("reports2/period_report.csv")).unwrap()
    );
}

#[test]
fn analyze_handles_empty_and_malformed_corpora() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = mallet(
        &[
            "analyze",
            "--corpus",
            "empty.jsonl",
            "--out",
            "empty-reports",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("0 conflict sets"));

    gen_demo(dir.path(), "7", "corpus.jsonl", "manifest.json");
    let mut lines: Vec<String> = fs::read_to_string(dir.path().join("corpus.jsonl"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines.insert(2, "not json at all".to_string());
    fs::write(dir.path().join("broken.jsonl"), lines.join("\n")).unwrap();

    // Lenient: warns with the line number, still succeeds.
    let out = mallet(
        &["analyze", "--corpus", "broken.jsonl", "--out", "r1"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    // Strict: exit 2.
    let out = mallet(
        &[
            "analyze",
            "--corpus",
            "broken.jsonl",
            "--out",
            "r2",
            "--strict",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"));
}

#[test]
fn analyze_rejects_duplicate_txids() {
    let dir = tempfile::tempdir().unwrap();
    gen_demo(dir.path(), "9", "corpus.jsonl", "manifest.json");
    let text = fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    let first = text.lines().next().unwrap();
    fs::write(dir.path().join("dup.jsonl"), format!("{text}{first}\n")).unwrap();
    let out = mallet(
        &["analyze", "--corpus", "dup.jsonl", "--out", "r"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("duplicate txid"));
}

#[test]
fn mutate_grows_four_bytes_and_preserves_the_key() {
    let dir = tempfile::tempdir().unwrap();
    gen_demo(dir.path(), "11", "corpus.jsonl", "manifest.json");
    let text = fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let tx_hex = parsed["hex"].as_str().unwrap();

    let out = mallet(
        &["mutate", "--tx", tx_hex, "--kind", "non_minimal_push"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let printed = stdout(&out);
    let mut lines = printed.lines();
    let mutated_hex = lines.next().unwrap();
    assert_eq!(mutated_hex.len(), tx_hex.len() + 8, "four bytes longer");

    let original = deserialize_tx(&hex::decode(tx_hex).unwrap()).unwrap();
    let mutated = deserialize_tx(&hex::decode(mutated_hex).unwrap()).unwrap();
    assert_ne!(original.txid(), mutated.txid());
    assert_eq!(normalized_key(&original), normalized_key(&mutated));
    assert!(printed.contains(&format!("normalized_key: {}", normalized_key(&original))));
}

#[test]
fn mutate_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    gen_demo(dir.path(), "13", "corpus.jsonl", "manifest.json");
    let text = fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let tx_hex = parsed["hex"].as_str().unwrap();

    // Missing key material for a re-sign.
    let out = mallet(&["mutate", "--tx", tx_hex, "--kind", "re_sign"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("missing context"));

    // Unknown kind.
    let out = mallet(&["mutate", "--tx", tx_hex, "--kind", "bogus"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    // Not applicable: padding twice.
    let once = mallet(
        &["mutate", "--tx", tx_hex, "--kind", "lax_der_padding"],
        dir.path(),
    );
    assert!(once.status.success());
    let padded_hex = stdout(&once).lines().next().unwrap().to_string();
    let out = mallet(
        &["mutate", "--tx", &padded_hex, "--kind", "lax_der_padding"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("not applicable"));
}

#[test]
fn simulate_writes_results_and_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sim.json"),
        serde_json::json!({
            "node_count": 60,
            "degree": 4.0,
            "latency_ms": {"min_ms": 5.0, "max_ms": 30.0},
            "attacker_connections": 0,
            "attacker_delay_ms": 10.0,
            "trials": 50,
            "seed": 3
        })
        .to_string(),
    )
    .unwrap();

    let out = mallet(
        &["simulate", "--config", "sim.json", "--out", "sim"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("probability=0.0000"));
    let results: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim/results.json")).unwrap())
            .unwrap();
    assert_eq!(results["results"][0]["probability"], 0.0);

    // Sweep rows come out sorted by the swept value.
    let out = mallet(
        &[
            "simulate",
            "--config",
            "sim.json",
            "--out",
            "sweep",
            "--sweep",
            "attacker_connections=10,2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].starts_with("2,"));
    assert!(rows[1].starts_with("10,"));

    // Infeasible config: exit 4.
    fs::write(
        dir.path().join("bad.json"),
        serde_json::json!({
            "node_count": 60,
            "degree": 60.0,
            "latency_ms": {"min_ms": 5.0, "max_ms": 30.0},
            "attacker_connections": 0,
            "attacker_delay_ms": 10.0,
            "trials": 50,
            "seed": 3
        })
        .to_string(),
    )
    .unwrap();
    let out = mallet(&["simulate", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("infeasible config"));
}

#[test]
fn gen_corpus_rejects_infeasible_plans() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("plan.json"),
        serde_json::json!({
            "background_txs": 0,
            "plants": [{
                "kind": "non_minimal_push",
                "count": 1,
                "total_value_satoshi": 100,
                "window": {"start": "2013-05-01T00:00:00Z", "end": "2013-05-01T00:00:00Z"},
            }]
        })
        .to_string(),
    )
    .unwrap();
    let out = mallet(
        &[
            "gen-corpus",
            "--seed",
            "1",
            "--out",
            "c.jsonl",
            "--manifest",
            "m.json",
            "--plan",
            "plan.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("infeasible plan"));
}
