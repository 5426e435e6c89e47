use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fitzcheck::harness::{load_scenario, read_report, run_suite, RunOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fitzcheck"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_scenario(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("s.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const MINIMAL: &str = r#"
name = "minimal"
dimension = 1
seed = 0

[[grids]]
name = "g"
lower = [-1.0]
upper = [3.0]
spacing = 0.05

[[operators]]
name = "c"
kind = "normal_cone"
set = { shape = "box", lo = [0.0], hi = [1.0] }

[[checks]]
check = "theorem36"
targets = ["c"]
grid = "g"
"#;

#[test]
fn minimal_scenario_loads_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, MINIMAL);
    let cfg = load_scenario(&path).unwrap();
    assert_eq!(cfg.operators.len(), 1);
    assert_eq!(cfg.checks.len(), 1);
    let out = run(&["suite", "--scenario", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("theorem36,c,Pass,hausdorff,0"));
}

#[test]
fn non_monotone_linear_operator_is_rejected_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
name = "bad"
dimension = 2
seed = 0

[[operators]]
name = "m"
kind = "linear"
matrix = [[-1.0, 0.0], [0.0, 0.0]]
offset = [0.0, 0.0]
"#;
    let path = write_scenario(&dir, body);
    let out = run(&["suite", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("linear operator not monotone"), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
}

#[test]
fn unresolved_target_is_rejected_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace(r#"targets = ["c"]"#, r#"targets = ["missing"]"#);
    let path = write_scenario(&dir, &body);
    let out = run(&["suite", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unresolved operator name"), "{}", stderr(&out));
}

#[test]
fn parse_errors_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "name = \"x\"\ndimension = \"one\"\nseed = 0\n");
    let out = run(&["suite", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("dimension") && err.contains("line 2"), "{err}");
}

#[test]
fn empty_check_list_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "name = \"empty\"\ndimension = 1\nseed = 3\n");
    let out = run(&["suite", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 0);
    assert_eq!(v["seed"], 3);
}

#[test]
fn expected_failures_exit_one_with_documented_gap() {
    let out = run(&["suite", "--scenario", scenario("expected-failures.toml").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "check,target,verdict,key_witness_label,key_witness_value");
    assert_eq!(lines.len(), 4, "{text}");
    assert_eq!(lines[1], "fitz_inequality,two_point,Fail,gap,0.25");
}

#[test]
fn operator_zoo_has_no_failures() {
    let out = run(&["suite", "--scenario", scenario("operator-zoo.toml").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(!stdout(&out).contains(",Fail,"));
}

#[test]
fn report_round_trips_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let path = scenario("expected-failures.toml");
    let out = run(&["suite", "--scenario", path.to_str().unwrap(), "--out", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).is_empty());
    let report = read_report(&json).unwrap();
    assert_eq!(report.results.len(), 3);

    let out = run(&["report", "--input", json.to_str().unwrap(), "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let direct = run(&["suite", "--scenario", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), stdout(&direct));
}

#[test]
fn unwritable_output_is_an_infrastructure_error() {
    let out = run(&[
        "suite",
        "--scenario",
        scenario("expected-failures.toml").to_str().unwrap(),
        "--out",
        "/nonexistent-dir/report.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent-dir/report.json"));
}

#[test]
fn missing_scenario_file_is_an_infrastructure_error() {
    let out = run(&["suite", "--scenario", "/nonexistent.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overrides_are_echoed_and_parallel_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("operator-zoo.toml");
    let mut texts = Vec::new();
    for parallel in [false, true] {
        let out_path = dir.path().join(format!("r{parallel}.json"));
        let mut args = vec![
            "suite",
            "--scenario",
            path.to_str().unwrap(),
            "--seed",
            "99",
            "--tol-eq",
            "1e-10",
            "--inf-threshold",
            "1e9",
            "--out",
            out_path.to_str().unwrap(),
        ];
        if parallel {
            args.push("--parallel");
        }
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let report = read_report(&out_path).unwrap();
        assert_eq!(report.seed, 99);
        assert_eq!(report.tolerances.eq_tol, 1e-10);
        assert_eq!(report.tolerances.inf_threshold, 1e9);
        texts.push(serde_json::to_string(&report.without_timing()).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn suite_report_matches_library_run() {
    let path = scenario("operator-zoo.toml");
    let out = run(&["suite", "--scenario", path.to_str().unwrap()]);
    let from_cli: fitzcheck::harness::Report = serde_json::from_str(&stdout(&out)).unwrap();
    let lib = run_suite(&load_scenario(&path).unwrap(), &RunOptions::default());
    assert_eq!(from_cli.without_timing(), lib.without_timing());
    assert_eq!(from_cli.digest, lib.digest);
}

#[test]
fn fitz_subcommand_prints_values() {
    let out = run(&["fitz", "--op", r#"{"kind":"linear","matrix":[[1.0]],"offset":[0.0]}"#, "--x", "1", "--xstar", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["kind"], "Finite");
    assert_eq!(v["value"], 1.0);

    let nc = r#"{"kind":"normal_cone","set":{"shape":"box","lo":[0.0],"hi":[1.0]}}"#;
    let out = run(&["fitz", "--op", nc, "--x", "2", "--xstar", "0", "--wgrid", "-3:5:0.05"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["kind"], "InfiniteSuspected");

    let out = run(&["fitz", "--op", nc, "--x", "2", "--xstar", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fitz_on_graph_is_exact() {
    let g = r#"{"kind":"graph","graph":[{"primal":[0.0],"dual":[0.0]},{"primal":[1.0],"dual":[1.0]}]}"#;
    let out = run(&["fitz", "--op", g, "--x", "0.5", "--xstar", "0.5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["value"], 0.0);
}

#[test]
fn check_subcommand_runs_ad_hoc() {
    let f = r#"{"kind":"subdiff","function":{"type":"norm_power","p":2.0,"scale":1.0}}"#;
    let base = ["check", "br", "--op", f, "--grid", "-4:4:0.1", "--x", "1", "--xstar", "0", "--format", "csv"];
    let out = run(&[&base[..], &["--alpha", "0.6", "--beta", "0.6"]].concat());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("br,op,Pass"));
    let out = run(&[&base[..], &["--alpha", "0.1", "--beta", "0.1"]].concat());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("br,op,NotApplicable"));

    let nc = r#"{"kind":"normal_cone","set":{"shape":"box","lo":[0.0,0.0],"hi":[1.0,1.0]}}"#;
    let out = run(&[
        "check", "near_convexity", "--op", nc, "--grid", "-1:3:0.1", "--z", "2,2", "--p", "2", "--lambdas", "1,10,100",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"][0]["certificate"]["verdict"], "Pass");
}

#[test]
fn check_subcommand_validates_inputs() {
    let f = r#"{"kind":"subdiff","function":{"type":"norm_power","p":2.0,"scale":1.0}}"#;
    let out = run(&["check", "no_such_check", "--op", f]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown check"));
    let out = run(&["check", "br", "--op", f, "--grid", "-4:4:0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["check", "br", "--op", "{not json", "--grid", "-4:4:0.1"]);
    assert_eq!(out.status.code(), Some(2));
}
