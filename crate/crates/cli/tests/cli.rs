mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use common::{serve, Reply};

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn corpus() -> PathBuf {
    workspace().join("crates/core/fixtures/corpus")
}

fn recorded(name: &str) -> PathBuf {
    workspace().join("crates/collector/fixtures").join(name)
}

fn solbug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solbug"))
        .args(args)
        .current_dir(workspace())
        .env_remove("SOLBUG_CATALOG")
        .env_remove("GITHUB_TOKEN")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scan_reentrancy_fixture_strict() {
    let file = corpus().join("d-a-r/buggy.sol");
    let o = solbug(&[
        "scan",
        s(&file),
        "--rules",
        "D-a-R",
        "--format",
        "json",
        "--strict",
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let v = json(&o);
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 1);
    assert_eq!(arr[0]["bug_id"], "D-a-R");
    assert_eq!(arr[0]["severity"], "Critical");
    assert_eq!(arr[0]["function"], "withdraw");
    // Without --strict, findings alone do not fail the run.
    let o = solbug(&["scan", s(&file), "--rules", "D-a-R"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn scan_fixed_fixture_is_clean() {
    let o = solbug(&[
        "scan",
        s(&corpus().join("d-a-r/fixed.sol")),
        "--strict",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o), serde_json::json!([]));
    let o = solbug(&["scan", s(&corpus().join("d-a-r/fixed.sol"))]);
    assert_eq!(stdout(&o), "");
}

#[test]
fn scan_rejects_unknown_rule() {
    let o = solbug(&["scan", s(&corpus()), "--rules", "bogus-id"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bogus-id"));
}

#[test]
fn scan_missing_path_is_an_error() {
    let good = corpus().join("d-a-r/buggy.sol");
    let o = solbug(&["scan", s(&good), "does/not/exist.sol"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does/not/exist.sol"));
    // Readable files are still reported.
    assert!(stdout(&o).contains("D-a-R"));
}

#[test]
fn fail_on_uses_catalog_severity() {
    // F-c-T grades Middle.
    let file = corpus().join("f-c-t/buggy.sol");
    assert_eq!(code(&solbug(&["scan", s(&file), "--fail-on", "high"])), 0);
    assert_eq!(code(&solbug(&["scan", s(&file), "--fail-on", "middle"])), 1);
    assert_eq!(code(&solbug(&["scan", s(&file), "--fail-on", "low"])), 1);
    assert_eq!(code(&solbug(&["scan", s(&file), "--fail-on", "urgent"])), 2);
}

#[test]
fn scan_directory_is_ordered_and_stable() {
    let dir = corpus();
    let a = solbug(&["scan", s(&dir), "--format", "json"]);
    let b = solbug(&["scan", s(&dir), "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let keys: Vec<(String, u64, String)> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["file"].as_str().unwrap().to_string(),
                f["span"]["start"].as_u64().unwrap(),
                f["bug_id"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    // The text form carries the same findings, one per line.
    let text = solbug(&["scan", s(&dir)]);
    let lines: Vec<String> = stdout(&text).lines().map(String::from).collect();
    assert_eq!(lines.len(), keys.len());
    for (line, f) in lines.iter().zip(v.as_array().unwrap()) {
        let want = format!(
            "{}:{}..{}: {} {} {}",
            f["file"].as_str().unwrap(),
            f["span"]["start"],
            f["span"]["end"],
            f["bug_id"].as_str().unwrap(),
            f["severity"].as_str().unwrap(),
            f["message"].as_str().unwrap()
        );
        assert_eq!(line, &want);
    }
}

#[test]
fn bench_self_reports_coverage() {
    let manifest = corpus().join("manifest.json");
    let o = solbug(&["bench", "--corpus", s(&manifest), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!((v["coverage"].as_f64().unwrap() - 7.0 / 49.0).abs() < 1e-12);
    assert_eq!(v["claims"].as_array().unwrap().len(), 7);
    let text = stdout(&solbug(&["bench", "--corpus", s(&manifest)]));
    assert!(text.contains("coverage: 0.1429 (7/49)"), "{text}");
}

#[test]
fn bench_split_shows_crafted_drop() {
    let manifest = corpus().join("manifest.json");
    let o = solbug(&[
        "bench",
        "--corpus",
        s(&manifest),
        "--split-crafted",
        "--format",
        "json",
    ]);
    let v = json(&o);
    let r = |part: &str| v[part]["micro"]["recall"].as_f64().unwrap();
    let p = |part: &str| v[part]["micro"]["precision"].as_f64().unwrap();
    assert_eq!(r("non_crafted"), 1.0);
    assert_eq!(p("non_crafted"), 1.0);
    assert!(r("crafted") < r("non_crafted"));
    assert!(p("crafted") < p("non_crafted"));
    assert!(v["non_crafted"]["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn bench_external_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("oyente_claims.json");
    std::fs::write(
        &report,
        r#"{"tool_name":"oyente","claims":["A-a-IO","D-a-R","F-c-T"],"findings":[]}"#,
    )
    .unwrap();
    let manifest = corpus().join("manifest.json");
    let o = solbug(&[
        "bench",
        "--corpus",
        s(&manifest),
        "--tool",
        s(&report),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!((v["coverage"].as_f64().unwrap() - 3.0 / 49.0).abs() < 1e-12);
    assert_eq!(v["micro"]["recall"], 0.0);
    assert_eq!(v["micro"]["precision"], Value::Null);

    // A recall gate fails on that report; exit 1, not 2.
    let o = solbug(&[
        "bench",
        "--corpus",
        s(&manifest),
        "--tool",
        s(&report),
        "--min-recall",
        "0.5",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bench_id_map_translates_rule_names() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let map = dir.path().join("map.json");
    std::fs::write(
        &report,
        r#"{"tool_name":"t","claims":["reentrancy"],"findings":[{"file":"d-a-r/buggy.sol","bug_id":"reentrancy"}]}"#,
    )
    .unwrap();
    std::fs::write(&map, r#"{"reentrancy":"D-a-R"}"#).unwrap();
    let manifest = corpus().join("manifest.json");
    let o = solbug(&[
        "bench",
        "--corpus",
        s(&manifest),
        "--tool",
        s(&report),
        "--id-map",
        s(&map),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["micro"]["counts"]["tp"], 1);
    let o = solbug(&["bench", "--corpus", s(&manifest), "--tool", s(&report)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("reentrancy"));
}

#[test]
fn bench_errors_exit_2() {
    assert_eq!(
        code(&solbug(&["bench", "--corpus", "missing/manifest.json"])),
        2
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"claims": 3}"#).unwrap();
    let manifest = corpus().join("manifest.json");
    assert_eq!(
        code(&solbug(&[
            "bench",
            "--corpus",
            s(&manifest),
            "--tool",
            s(&bad)
        ])),
        2
    );
}

#[test]
fn catalog_kind_and_category() {
    let o = solbug(&["catalog", "--kind", "D-a-R", "--format", "json"]);
    let v = json(&o);
    assert_eq!(v["severity"], "Critical");
    assert_eq!(v["has_detector"], true);
    let text = stdout(&solbug(&["catalog", "--kind", "D-a-R"]));
    assert!(text.contains("severity: Critical") && text.contains("detector: available"));

    let v = json(&solbug(&["catalog", "--category", "I", "--format", "json"]));
    let ids: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k["id"].as_str().unwrap())
        .collect();
    assert!(ids.contains(&"I-a-I") && ids.contains(&"I-b-F"));
    assert!(ids.iter().all(|id| id.starts_with("I-")));
}

#[test]
fn catalog_list_has_49_rows() {
    let v = json(&solbug(&["catalog", "--list", "--format", "json"]));
    assert_eq!(v.as_array().unwrap().len(), 49);
    let text = stdout(&solbug(&["catalog", "--list"]));
    assert_eq!(text.lines().count(), 49 + 1);
}

#[test]
fn catalog_unknown_ids_exit_2() {
    assert_eq!(code(&solbug(&["catalog", "--kind", "Z-z-Z"])), 2);
    assert_eq!(code(&solbug(&["catalog", "--category", "J"])), 2);
}

#[test]
fn catalog_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("catalog.json");
    std::fs::write(&bad, "{}").unwrap();
    assert_eq!(
        code(&solbug(&["--catalog", s(&bad), "catalog", "--list"])),
        2
    );
}

fn merge_file(dir: &Path, records: Value) -> PathBuf {
    let p = dir.join("records.json");
    std::fs::write(&p, records.to_string()).unwrap();
    p
}

#[test]
fn merge_follows_the_three_rules() {
    let dir = tempfile::tempdir().unwrap();
    let rec = |src: &str, name: &str, b: &str, c: &[&str]| serde_json::json!({"source": src, "name": name, "behavior": b, "consequence": c});
    // Different behaviors stay apart.
    let p = merge_file(
        dir.path(),
        serde_json::json!([
            rec("a", "x", "reentrant call", &["steal"]),
            rec("b", "y", "overflow", &["loss"])
        ]),
    );
    let v = json(&solbug(&["merge", s(&p), "--format", "json"]));
    assert_eq!(v.as_array().unwrap().len(), 2);

    // Same behavior, different consequences: union, marked merged.
    let p = merge_file(
        dir.path(),
        serde_json::json!([
            rec("a", "reentrancy", "reentrant-call", &["steal ethers"]),
            rec("b", "recursive call", "reentrant-call", &["drain balance"])
        ]),
    );
    let v = json(&solbug(&["merge", s(&p), "--format", "json"]));
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(
        v[0]["consequence"],
        serde_json::json!(["drain balance", "steal ethers"])
    );
    assert_eq!(v[0]["merged"], true);
    assert_eq!(
        v[0]["aliases"],
        serde_json::json!(["recursive call", "reentrancy"])
    );

    // Duplicates collapse.
    let r = rec("a", "tod", "front run", &["double spend"]);
    let p = merge_file(dir.path(), serde_json::json!([r.clone(), r]));
    let o = solbug(&["merge", s(&p)]);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn merge_rejects_bad_records() {
    let dir = tempfile::tempdir().unwrap();
    let p = merge_file(dir.path(), serde_json::json!([{"name": "x"}]));
    assert_eq!(code(&solbug(&["merge", s(&p)])), 2);
    let p = merge_file(
        dir.path(),
        serde_json::json!([{"source": "s", "name": "x", "behavior": " ", "consequence": ["c"]}]),
    );
    assert_eq!(code(&solbug(&["merge", s(&p)])), 2);
}

fn watch_config(dir: &Path, extra: Value) -> PathBuf {
    let mut cfg = serde_json::json!({"state_path": "state.json"});
    cfg.as_object_mut()
        .unwrap()
        .extend(extra.as_object().unwrap().clone());
    let p = dir.join("watch.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    p
}

#[test]
fn watch_once_against_recording() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = format!("file://{}", recorded("search_initial.json").display());
    let cfg = watch_config(dir.path(), serde_json::json!({"endpoint": endpoint}));
    let o = solbug(&["watch", "--config", s(&cfg), "--once"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("every 15 days"));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 266);
    assert!(out.lines().all(|l| l.contains(" added github.com/")));
    assert!(dir.path().join("state.json").exists());

    // Same recording again: nothing to report.
    let o = solbug(&["watch", "--config", s(&cfg), "--once", "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "");
}

#[test]
fn watch_bad_token_exits_2() {
    let server = serve(1, |_| Reply::new(401, r#"{"message":"Bad credentials"}"#));
    let dir = tempfile::tempdir().unwrap();
    let cfg = watch_config(
        dir.path(),
        serde_json::json!({"endpoint": server.url, "keywords": ["k"]}),
    );
    let o = Command::new(env!("CARGO_BIN_EXE_solbug"))
        .args(["watch", "--config", s(&cfg), "--once"])
        .env("GITHUB_TOKEN", "wrong")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("401"));
    assert_eq!(
        server.requests.lock().unwrap()[0].header("authorization"),
        Some("Bearer wrong")
    );
    assert!(!dir.path().join("state.json").exists());
}

#[test]
fn watch_webhook_failure_exits_1() {
    let server = serve(1, |_| Reply::new(500, ""));
    let dir = tempfile::tempdir().unwrap();
    let endpoint = format!("file://{}", recorded("search_initial.json").display());
    let cfg = watch_config(
        dir.path(),
        serde_json::json!({"endpoint": endpoint, "notify": {"webhook": format!("{}/hook", server.url)}}),
    );
    let o = solbug(&["watch", "--config", s(&cfg), "--once"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(!dir.path().join("state.json").exists());
}

#[test]
fn watch_invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = watch_config(dir.path(), serde_json::json!({"keywords": []}));
    let o = solbug(&["watch", "--config", s(&cfg), "--once"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("keywords"));
}
