//! End-to-end runs of the `hoare2ri` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoare2ri"))
        .args(args)
        .env_remove("HOARE2RI_SOLVER")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

/// Timings and solver counters vary between runs.
fn normalize(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("solver");
            if let Some(ms) = m.get_mut("millis") {
                *ms = Value::from(0);
            }
            m.values_mut().for_each(normalize);
        }
        Value::Array(xs) => xs.iter_mut().for_each(normalize),
        _ => {}
    }
}

#[test]
fn prove_sum_is_proved_with_one_hypothesis() {
    let o = run(&["prove", path(&fixture("sum.whl"))]);
    let out = stdout(&o);
    assert_eq!(code(&o), 0, "{out}");
    assert!(out.contains("verdict: proved"), "{out}");
    assert!(out.contains("final process (∅, {A6})"), "{out}");
    assert_eq!(out.matches("hyp:").count(), 1, "{out}");
}

#[test]
fn prove_report_matches_golden_file() {
    let o = run(&["prove", path(&fixture("sum.whl")), "--json"]);
    assert_eq!(code(&o), 0);
    let mut got: Value = serde_json::from_slice(&o.stdout).unwrap();
    normalize(&mut got);
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/prove_sum.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&golden).unwrap()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn exit_codes_follow_the_verdict() {
    for (name, verdict, exit) in [
        ("sum.whl", "proved", 0),
        ("sum_neq.whl", "unknown", 2),
        ("max.whl", "proved", 0),
        ("nested.whl", "proved", 0),
    ] {
        let o = run(&["prove", path(&fixture(name)), "--json"]);
        let report: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(report["verdict"], verdict, "{name}");
        assert_eq!(code(&o), exit, "{name}");
    }
}

#[test]
fn invalid_tableau_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(fixture("sum.whl")).unwrap();
    let bad = dir.path().join("bad.whl");
    std::fs::write(&bad, src.replace("@ z = 1/2 * x * (x + 1);", "@ false;")).unwrap();
    let o = run(&["prove", path(&bad), "--json"]);
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["verdict"], "tableau-invalid");

    let o = run(&["check-tableau", path(&bad), "--json"]);
    assert_eq!(code(&o), 1);
    let obligations: Value = serde_json::from_slice(&o.stdout).unwrap();
    let violated: Vec<&Value> = obligations
        .as_array()
        .unwrap()
        .iter()
        .filter(|o| o["status"] == "violated")
        .collect();
    assert_eq!(violated.len(), 1, "{obligations:#}");
    assert_eq!(violated[0]["kind"], "implication");
}

#[test]
fn interpret_prints_the_final_state() {
    let o = run(&["interpret", path(&fixture("sum.whl")), "--input", "x=3,i=0,z=0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "x=3,i=3,z=6\n");
    let o = run(&["interpret", path(&fixture("sum_neq.whl")), "--input", "x=-1", "--fuel", "500"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn convert_emits_the_seven_rules() {
    let o = run(&["convert", path(&fixture("sum_program.whl")), "--emit-lctrs"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("sort state\n"), "{out}");
    assert_eq!(out.lines().skip_while(|l| *l != "rules").count(), 8, "{out}");
    assert!(out.contains("l3+: state3(x,i,z) -> state4(x,i,z) [x > i]"), "{out}");
}

#[test]
fn transform_trace_replays_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let sum = fixture("sum.whl");
    let o = run(&["transform", path(&sum), "--emit-proof", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("Expansion A6 -> A7,A11"));

    let o = run(&["transform", path(&sum), "--replay", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("replayed 15 steps"));

    let text = std::fs::read_to_string(&trace).unwrap();
    std::fs::write(&trace, text.replacen("\"l12\"", "\"l14\"", 1)).unwrap();
    let o = run(&["transform", path(&sum), "--replay", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("replay rejected"));
}

#[test]
fn narration_walks_through_the_derivation() {
    let o = run(&["transform", path(&fixture("sum.whl")), "--narrate"]);
    let out = stdout(&o);
    assert!(out.starts_with("We start from the goal:"), "{out}");
    assert!(out.contains("we apply Expansion to (A6)"), "{out}");
    assert!(out.ends_with("The final process is (∅, {A6}).\n"), "{out}");
}

#[test]
fn rank_override_is_checked() {
    let sum = fixture("sum.whl");
    let o = run(&["prove", path(&sum), "--rank", "9=x - i + 3", "--json"]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let l = &report["termination"]["loops"][0];
    assert_eq!(l["outcome"]["source"], "override", "{l:#}");

    // A bad rank is rejected and search takes over.
    let o = run(&["prove", path(&sum), "--rank", "i - x", "--json"]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let l = &report["termination"]["loops"][0];
    assert_eq!(l["outcome"]["source"], "search", "{l:#}");
    assert!(l.get("rejected").is_some());

    let o = run(&["prove", path(&sum), "--rank", "3=x"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn rewrite_normalizes_factorial() {
    let o = run(&["rewrite", path(&fixture("fact.lctrs")), "--term", "fact(3)"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).ends_with("normal form after 10 steps: 6\n"), "{}", stdout(&o));
    let o = run(&["rewrite", path(&fixture("sum_program.whl")), "--term", "state1(3,0,0)"]);
    assert!(stdout(&o).contains("end(3,3,6)"), "{}", stdout(&o));
}

#[test]
fn usage_and_io_errors_exit_three() {
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["prove"])), 3);
    assert_eq!(code(&run(&["prove", "/nonexistent/file.whl"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn syntax_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.whl");
    std::fs::write(&bad, "x := ;\n").unwrap();
    let o = run(&["parse", path(&bad)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unusable_solver_falls_back_with_a_warning() {
    let o = Command::new(env!("CARGO_BIN_EXE_hoare2ri"))
        .args(["prove", path(&fixture("sum.whl"))])
        .env("HOARE2RI_SOLVER", "/nonexistent/solver -in")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("warning"), "{err}");
    let o = run(&["--builtin", "prove", path(&fixture("sum.whl"))]);
    assert_eq!(code(&o), 0);
}
