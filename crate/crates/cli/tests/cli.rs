use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ghostline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostline"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn bench(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_reports_safe_with_exit_zero() {
    let o = ghostline(&["verify", bench("triangular.cw").to_str().unwrap(), "--operator", "square", "--json", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["verdict"], "safe");
    assert_eq!(j["selection"]["C"], "square.R2");
    assert_eq!(j["selection"]["D"], "square.R4");
    assert_eq!(j["stats"]["inst_space"], 16);
    assert_eq!(j["checked"], true);
}

#[test]
fn verify_streams_progress_to_stderr() {
    let o = ghostline(&["verify", bench("triangular.cw").to_str().unwrap(), "--operator", "square"]);
    assert_eq!(o.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&o.stderr);
    let events: Vec<serde_json::Value> = stderr.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!events.is_empty());
    assert_eq!(events.last().unwrap()["verdict"], "safe");
    assert!(stdout(&o).starts_with("verdict: safe"));
}

#[test]
fn failing_assertion_exits_one() {
    let o = ghostline(&["verify", bench("assert_false.cw").to_str().unwrap(), "--json", "--quiet"]);
    assert_eq!(o.status.code(), Some(1));
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["verdict"], "unsafe");
    assert_eq!(j["counterexample"]["length"], 1);
    assert_eq!(j["checked"], true);
}

#[test]
fn errors_exit_three() {
    assert_eq!(ghostline(&["verify", "/nonexistent.cw"]).status.code(), Some(3));
    assert_eq!(ghostline(&["verify", "--bogus"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cw");
    std::fs::write(&bad, "Int x;\nx = ;").unwrap();
    let o = ghostline(&["verify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:5"));
    let tri = bench("triangular.cw");
    assert_eq!(ghostline(&["verify", tri.to_str().unwrap(), "--operator", "cube"]).status.code(), Some(3));
    assert_eq!(ghostline(&["verify", tri.to_str().unwrap(), "--workers", "2"]).status.code(), Some(3));
}

#[test]
fn timeout_gives_inconclusive_exit_two() {
    let o = ghostline(&["verify", bench("extra/sum_two_ended-UB.cw").to_str().unwrap(), "--timeout", "0", "--quiet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("verdict: inconclusive"));
}

#[test]
fn empty_bench_directory_gives_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ghostline(&["bench", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "name,verdict,time_s,inst_space,inst_steps\n");
    let o = ghostline(&["bench", dir.path().to_str().unwrap(), "--json", "--quiet"]);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["schema"], 1);
    assert_eq!(j["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn bench_writes_rows_and_category_totals() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["sum_eq-UB.cw", "extra/sum_eq_wrong-UB.cw"] {
        let src = bench(name);
        std::fs::copy(&src, dir.path().join(src.file_name().unwrap())).unwrap();
    }
    std::fs::write(dir.path().join("broken.cw"), "x = ;").unwrap();
    let csv = dir.path().join("out.csv");
    let o = ghostline(&["bench", dir.path().to_str().unwrap(), "--csv", csv.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, stdout(&o));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,verdict,time_s,inst_space,inst_steps");
    assert!(lines[1].starts_with("broken,error,"));
    assert!(lines[2].starts_with("sum_eq-UB,safe,"));
    assert!(lines[3].starts_with("sum_eq_wrong-UB,unsafe,"));
    assert!(lines[4].starts_with("[sum],1/2 safe,"));
    assert_eq!(lines.len(), 5);
}

#[test]
fn certify_passes_library_operators_and_rejects_the_mutant() {
    let o = ghostline(&["certify", "sum"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("FAIL"));
    let o = ghostline(&["certify", "square_mutated", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let failed_2c = j["entries"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["condition"] == "2c" && e["passed"] == false && !e["witness"].is_null());
    assert!(failed_2c);
    assert_eq!(ghostline(&["certify", "cube"]).status.code(), Some(3));
}
