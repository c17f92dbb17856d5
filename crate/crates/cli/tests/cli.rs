use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn atc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atc-ioc")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TRACES: &str = "\
flight_id,t_unix_s,lat_deg,lon_deg,alt_m
north,1700000007,47.40,-122.5,3000
north,1700000041,47.41,-122.5,2950
north,1700000068,47.42,-122.5,2900
north,1700000099,47.43,-122.5,2850
north,1700000131,47.44,-122.5,2800
short,1700000000,47.40,-122.4,3000
short,1700000030,47.41,-122.4,3000
";

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&atc(&["--help"])), 0);
    assert_eq!(code(&atc(&["--version"])), 0);
    assert_eq!(code(&atc(&["synth", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&atc(&[])), 1);
    assert_eq!(code(&atc(&["fly"])), 1);
    // Missing required --out.
    assert_eq!(code(&atc(&["synth"])), 1);
    let out = atc(&["synth", "-o", p(dir.path()), "--set", "no_such_key=1"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
    assert_eq!(code(&atc(&["synth", "-o", p(dir.path()), "--set", "dt_s"])), 1);
    assert_eq!(code(&atc(&["export", "-o", p(dir.path())])), 1);
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = atc(&["plan", "-o", p(dir.path()), "--demos", p(&missing)]);
    assert_eq!(code(&out), 2);
    let cfg = dir.path().join("missing.toml");
    assert_eq!(code(&atc(&["synth", "-o", p(dir.path()), "--config", p(&cfg)])), 2);
}

#[test]
fn ingest_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces.csv");
    fs::write(&traces, TRACES).unwrap();
    let ing = dir.path().join("ingest");
    let out = atc(&["ingest", "-o", p(&ing), "--traces", p(&traces)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["demos.csv", "ingest_report.csv", "rejected.csv", "config.toml"] {
        assert!(ing.join(f).is_file(), "{f}");
    }
    let rejected = fs::read_to_string(ing.join("rejected.csv")).unwrap();
    assert!(rejected.contains("short"));
    assert!(!rejected.contains("north"));

    let exp = dir.path().join("export");
    let demos = ing.join("demos.csv");
    assert_eq!(code(&atc(&["export", "-o", p(&exp), "--demos", p(&demos)])), 0);
    let rows = fs::read_to_string(exp.join("trajectories.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 5);
    let series: serde_json::Value = serde_json::from_str(&fs::read_to_string(exp.join("series.json")).unwrap()).unwrap();
    assert_eq!(series["trajectories"][0]["id"], "north");
}

#[test]
fn ingest_with_no_usable_trace_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces.csv");
    let only_short: String = TRACES.lines().filter(|l| !l.starts_with("north")).map(|l| format!("{l}\n")).collect();
    fs::write(&traces, only_short).unwrap();
    assert_eq!(code(&atc(&["ingest", "-o", p(dir.path()), "--traces", p(&traces)])), 2);
}

#[test]
fn config_file_and_overrides_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 9\nsynth_demos = 2\nsynth_scenes = 0\nbudget_expansions = 20000\n").unwrap();
    let out_dir = dir.path().join("synth");
    let out = atc(&["synth", "-o", p(&out_dir), "--config", p(&cfg), "--set", "synth_demos=1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let effective = fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert!(effective.contains("seed = 9"));
    assert!(effective.contains("synth_demos = 1"));
    let demos = fs::read_to_string(out_dir.join("demos.csv")).unwrap();
    assert!(demos.lines().count() > 1);
    assert!(out_dir.join("ground_truth.json").is_file());

    // Plan against the ground-truth routing cost.
    let plan_dir = dir.path().join("plan");
    let truth = out_dir.join("ground_truth.json");
    let demos_path = out_dir.join("demos.csv");
    let args = [
        "plan",
        "-o",
        p(&plan_dir),
        "--demos",
        p(&demos_path),
        "--field",
        p(&truth),
        "--set",
        "budget_expansions=20000",
    ];
    assert_eq!(code(&atc(&args)), 0);
    let summary = fs::read_to_string(plan_dir.join("plan_summary.csv")).unwrap();
    assert!(summary.contains("found"), "{summary}");
}
