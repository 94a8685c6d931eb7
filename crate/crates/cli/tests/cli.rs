use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dumpopt_core::io::parse_metrics;

fn dumpopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dumpopt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/ron125")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(dumpopt(&["--help"]).status.code(), Some(0));
    assert_eq!(dumpopt(&["replay", "--help"]).status.code(), Some(0));
    assert_eq!(dumpopt(&["generate", "--bogus"]).status.code(), Some(2));
    assert_eq!(dumpopt(&["frobnicate"]).status.code(), Some(2));
    let o = dumpopt(&["bench", "--probs", "1,x"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn generate_is_deterministic_and_sized() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = dumpopt(&["generate", "--cycles", "6", "--orbits", "127", "--out-dir", s(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("passes: 762"));
        assert!(stdout(&o).contains("baseline failures: 67"));
    }
    for name in ["events.csv", "telemetry.csv", "mission.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(fs::read_to_string(a.join("events.csv")).unwrap().lines().count(), 763);
}

#[test]
fn generate_without_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dumpopt(&["generate", "--corruption", "0", "--seed", "17", "--out-dir", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("baseline failures: 0"));
}

#[test]
fn generate_rejects_bad_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dumpopt(&["generate", "--aos-step", "0", "--out-dir", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn replay_calibrated_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(dumpopt(&["generate", "--out-dir", s(&data)]).status.success());
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let out = tmp.path().join(format!("out{jobs}"));
        let o = dumpopt(&["replay", "--dataset-dir", s(&data), "--out-dir", s(&out), "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
        let metrics = parse_metrics(&fs::read_to_string(out.join("metrics.toml")).unwrap()).unwrap();
        let saved = metrics.saved.unwrap();
        assert_eq!(saved.baseline_failures, 67);
        assert!(saved.saved_fraction_f64().unwrap() >= 0.62);
        outputs.push(["schedule.csv", "trace.csv", "metrics.toml"].map(|n| fs::read(out.join(n)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn replay_fixture_gives_staircase_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dumpopt(&["replay", "--dataset-dir", s(&fixture()), "--out-dir", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("learner failures: 2 (1 after the first step)"), "{}", stdout(&o));
    let expected = fs::read_to_string(fixture().join("expected_trace.csv")).unwrap();
    assert_eq!(fs::read_to_string(tmp.path().join("trace.csv")).unwrap(), expected);
    let schedule = fs::read_to_string(tmp.path().join("schedule.csv")).unwrap();
    assert!(schedule.starts_with("#mission_id=S6-RON125\n"));
    assert_eq!(schedule.lines().count(), 8);
}

#[test]
fn replay_with_separate_files() {
    let tmp = tempfile::tempdir().unwrap();
    let f = fixture();
    let o = dumpopt(&[
        "replay",
        "--config",
        s(&f.join("mission.toml")),
        "--events",
        s(&f.join("events.csv")),
        "--telemetry",
        s(&f.join("telemetry.csv")),
        "--out-dir",
        s(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = dumpopt(&["replay", "--config", s(&f.join("mission.toml")), "--out-dir", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_leaves_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = dumpopt(&["replay", "--dataset-dir", s(&tmp.path().join("nope")), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("mission.toml"));
    assert!(!out.exists());
}

#[test]
fn malformed_row_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    for name in ["mission.toml", "telemetry.csv"] {
        fs::copy(fixture().join(name), data.join(name)).unwrap();
    }
    let events = fs::read_to_string(fixture().join("events.csv")).unwrap();
    let broken = events.replacen("2021-02-08T01:53:30.000Z", "2021-02-08 01:53:30", 1);
    fs::write(data.join("events.csv"), broken).unwrap();
    let out = tmp.path().join("out");
    let o = dumpopt(&["replay", "--dataset-dir", s(&data), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bench_certain_instance() {
    let o = dumpopt(&["bench", "--probs", "1,1;1,1", "--runs", "50", "--horizon", "40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    // instance,n_aos,n_los,horizon,runs,bound,max_mistakes,violations,mean_regret
    assert!(row.starts_with("0,2,2,40,50,1,0,0,0.0000,"), "{row}");
}

#[test]
fn bench_random_instances_respect_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("bench.csv");
    let o = dumpopt(&[
        "bench",
        "--seed",
        "3",
        "--instances",
        "4",
        "--runs",
        "100",
        "--horizon",
        "200",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(report).unwrap();
    assert_eq!(text, stdout(&o));
    assert_eq!(text.lines().count(), 5);
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').nth(7), Some("0"), "{line}");
    }
}

#[test]
fn bench_exact_cross_check() {
    let o = dumpopt(&["bench", "--probs", "1;0.5", "--horizon", "2", "--runs", "10", "--mc-runs", "100000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(",3/8,"), "{}", stdout(&o));
}

#[test]
fn trace_from_dataset_and_file() {
    let o = dumpopt(&["trace", "--dataset-dir", s(&fixture()), "--ron", "125"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = fs::read_to_string(fixture().join("expected_trace.csv")).unwrap();
    assert_eq!(stdout(&o), expected);

    let o = dumpopt(&["trace", "--trace", s(&fixture().join("expected_trace.csv")), "--ron", "125"]);
    assert_eq!(stdout(&o), expected);
    let o = dumpopt(&["trace", "--trace", s(&fixture().join("expected_trace.csv")), "--ron", "7"]);
    assert_eq!(o.status.code(), Some(3));
}
