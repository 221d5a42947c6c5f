use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrt")).args(args).output().expect("spawn qrt")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn builtin_text(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"));
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn builtin_scenario_passes() {
    let o = qrt(&["run", "coherence_of_plus"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json_out(&o);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["seed"], 1);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn same_seed_gives_identical_results() {
    let a = json_out(&qrt(&["run", "entanglement_of_phi", "--seed", "5"]));
    let b = json_out(&qrt(&["run", "entanglement_of_phi", "--seed", "5"]));
    assert_eq!(a["seed"], 5);
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["certificates"], b["certificates"]);
}

#[test]
fn empty_directory_is_an_empty_passing_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrt(&["suite", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = json_out(&o);
    assert_eq!(s["passed"], 0);
    assert_eq!(s["failed"], 0);
    assert!(s["reports"].as_array().unwrap().is_empty());
}

#[test]
fn corrupt_file_is_invalid_and_does_not_stop_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a_broken.json"), "{ not json").unwrap();
    std::fs::write(dir.path().join("b_good.json"), builtin_text("no_fmax")).unwrap();
    let o = qrt(&["suite", dir.path().to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let s = json_out(&o);
    let reports = s["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["status"], "invalid");
    assert!(reports[0]["error"].is_string());
    assert_eq!(reports[1]["status"], "pass");
}

#[test]
fn unmet_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: Value = serde_json::from_str(&builtin_text("coherence_of_plus")).unwrap();
    s["expected"]["value"]["value"] = 0.5.into();
    let p = dir.path().join("wrong.json");
    std::fs::write(&p, s.to_string()).unwrap();
    let o = qrt(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = json_out(&o);
    assert_eq!(r["status"], "fail");
    let failed: Vec<&str> = r["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(|c| c["key"].as_str().unwrap()).collect();
    assert_eq!(failed, ["value"]);
}

#[test]
fn bad_parameters_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: Value = serde_json::from_str(&builtin_text("coherence_of_plus")).unwrap();
    s["params"] = serde_json::json!({"eps": 1.5});
    let p = dir.path().join("eps.json");
    std::fs::write(&p, s.to_string()).unwrap();
    assert_eq!(qrt(&["run", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(qrt(&["describe", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unknown_scenario_is_invalid() {
    assert_eq!(qrt(&["run", "no_such_scenario"]).status.code(), Some(2));
}

#[test]
fn csv_output_has_one_row_per_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = qrt(&["run", "no_fmax", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scenario,status,seed,key,value,expected,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.starts_with("no_fmax,pass,")));
}

#[test]
fn describe_lists_and_explains_builtins() {
    let o = qrt(&["describe"]);
    assert_eq!(o.status.code(), Some(0));
    let list = String::from_utf8(o.stdout).unwrap();
    assert_eq!(list.lines().count(), 9);
    let o = qrt(&["describe", "assisted_phi"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("assisted_phi (assisted)"));
    assert!(text.contains("expects:"));
}
