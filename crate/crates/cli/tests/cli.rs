use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn biopatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biopatch"))
        .args(args)
        .env("BIOPATCH_THREADS", "2")
        .output()
        .expect("spawn biopatch")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn digest(path: &Path) -> String {
    Sha256::digest(std::fs::read(path).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
}

fn gen_small(out: &Path, seed: &str) {
    let o = biopatch(&["gen-people", "--seed", seed, "--n", "60", "--out", p(out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_people_writes_population_and_pools() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "3");
    let people = std::fs::read_to_string(dir.path().join("people.jsonl")).unwrap();
    assert_eq!(people.lines().count(), 60);
    let pools: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pools.json")).unwrap()).unwrap();
    assert_eq!(pools["seed"], 3);
    assert_eq!(pools["known"].as_array().unwrap().len(), 20);
}

#[test]
fn corpus_and_schedule_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    for run in ["a", "b"] {
        let people = dir.path().join(format!("people_{run}"));
        let corpus = dir.path().join(format!("corpus_{run}"));
        gen_small(&people, "11");
        let o = biopatch(&["build-corpus", "--people", p(&people), "--out", p(&corpus)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let spec = dir.path().join("spec.json");
        std::fs::write(&spec, r#"{"name":"m50","setting":"qa","replaced":"M","unknown_fraction":50,"seed":4}"#)
            .unwrap();
        let manifest = dir.path().join(format!("manifest_{run}.json"));
        let o = biopatch(&["schedule", "--variant", p(&spec), "--corpus", p(&corpus), "--out", p(&manifest)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        digests.push((digest(&corpus.join("sft.jsonl")), digest(&manifest)));
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn invalid_spec_exits_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let people = dir.path().join("people");
    let corpus = dir.path().join("corpus");
    gen_small(&people, "5");
    assert!(biopatch(&["build-corpus", "--people", p(&people), "--out", p(&corpus)]).status.success());
    let spec = dir.path().join("bad.json");
    std::fs::write(&spec, r#"{"name":"bad","setting":"qa","replaced":"M","unknown_fraction":33,"seed":1}"#).unwrap();
    let out = dir.path().join("manifest.json");
    let o = biopatch(&["schedule", "--variant", p(&spec), "--corpus", p(&corpus), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let err = String::from_utf8_lossy(&o.stderr);
    let line: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(line["level"], "error");
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = biopatch(&["build-corpus", "--people", p(&dir.path().join("nope")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_exit_1() {
    assert_eq!(biopatch(&["schedule", "--bogus"]).status.code(), Some(1));
    assert_eq!(biopatch(&["--help"]).status.code(), Some(0));
}

fn score_file(dir: &Path, name: &str, replaced: Option<&str>, acc: [f64; 4]) -> std::path::PathBuf {
    let variant = replaced.map(|r| {
        serde_json::json!({ "name": name, "setting": "qa", "replaced": r, "unknown_fraction": 100, "seed": 0 })
    });
    let tests = ["B_QA", "D_QA", "M_QA", "wiki"];
    let per_test: serde_json::Map<String, serde_json::Value> =
        tests.iter().zip(acc).map(|(t, a)| (t.to_string(), a.into())).collect();
    let counts: serde_json::Map<String, serde_json::Value> = tests
        .iter()
        .zip(acc)
        .map(|(t, a)| (t.to_string(), serde_json::json!({ "correct": (a * 1000.0).round() as u64, "total": 1000 })))
        .collect();
    let report = serde_json::json!({
        "toolkit_version": "0.1.0",
        "variant": variant,
        "per_test": per_test,
        "counts": counts,
        "parse_failures": 0,
        "missing_predictions": 0,
    });
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_vec(&report).unwrap()).unwrap();
    path
}

#[test]
fn report_with_qa_grouping_has_three_groups() {
    let dir = tempfile::tempdir().unwrap();
    let base = score_file(dir.path(), "baseline", None, [0.5, 0.6, 0.5, 0.2]);
    let b = score_file(dir.path(), "b_unk", Some("B"), [0.2, 0.6, 0.5, 0.19]);
    let m = score_file(dir.path(), "m_unk", Some("M"), [0.5, 0.58, 0.25, 0.18]);
    let out = dir.path().join("report.json");
    let o = biopatch(&[
        "report", "--baseline", p(&base), "--variants", p(&b), p(&m), "--grouping", "qa", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let groups = r["groups"].as_object().unwrap();
    assert_eq!(groups.len(), 3);
    assert!(groups["STQA"]["mean_delta_pct"].as_f64().unwrap() < -40.0);
    assert!(dir.path().join("report.csv").exists());
}
