//! End-to-end runs of the `outbreak` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn outbreak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outbreak"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SCENARIO: &str = r#"{"kind": "collaborative_outbreak", "n": 12, "lambda": 0.5,
    "team": [1, 2, 3, 4], "delta": 2.0, "change_t": 60, "t_max": 120, "seed": 3}"#;

#[test]
fn simulate_is_deterministic_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "scenario.json", SCENARIO);
    let a = outbreak(&["simulate", "--scenario", &scenario]);
    let b = outbreak(&["simulate", "--scenario", &scenario]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stdout.starts_with(b"t,src,dst,count\n"));
    let c = outbreak(&["simulate", "--scenario", &scenario, "--seed", "4"]);
    assert_ne!(a.stdout, c.stdout);

    let out = dir.path().join("series.csv");
    let d = outbreak(&["simulate", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert!(d.status.success());
    assert_eq!(fs::read(&out).unwrap(), a.stdout);
}

#[test]
fn monitor_flags_the_planted_team() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "scenario.json", SCENARIO);
    let series = dir.path().join("series.csv");
    assert!(outbreak(&["simulate", "--scenario", &scenario, "--out", series.to_str().unwrap()]).status.success());
    let flags = dir.path().join("flags.csv");
    let out = outbreak(&[
        "monitor",
        "--series",
        series.to_str().unwrap(),
        "--lambda",
        "0.5",
        "--stat",
        "gewma",
        "--team",
        "1,2,3,4",
        "--threshold",
        "0.8",
        "--out-flags",
        flags.to_str().unwrap(),
    ]);
    let summary = stdout_json(&out);
    assert_eq!(summary["steps"], 120);
    let first = summary["first_flag"].as_u64().expect("the outbreak is flagged");
    assert!(first > 60, "flag before the change at {first}");
    let text = fs::read_to_string(&flags).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,statistic,team_or_leader,value,boundary,flagged"));
    assert_eq!(lines.count(), 120);
    assert!(text.contains(",GEWMA,1|2|3|4,"));
}

#[test]
fn two_sided_monitor_writes_a_chart() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "scenario.json", SCENARIO);
    let series = dir.path().join("series.csv");
    assert!(outbreak(&["simulate", "--scenario", &scenario, "--out", series.to_str().unwrap()]).status.success());
    let chart = dir.path().join("chart.svg");
    let out = outbreak(&[
        "monitor",
        "--series",
        series.to_str().unwrap(),
        "--lambda",
        "0.5",
        "--stat",
        "gewma",
        "--team",
        "1,2,3,4",
        "--threshold",
        "0.8",
        "--lower-threshold",
        "0.6",
        "--two-sided",
        "--out-chart",
        chart.to_str().unwrap(),
    ]);
    stdout_json(&out);
    let svg = fs::read_to_string(&chart).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "scenario.json", SCENARIO);
    let series = dir.path().join("series.csv");
    assert!(outbreak(&["simulate", "--scenario", &scenario, "--out", series.to_str().unwrap()]).status.success());
    // The file asks for an unreachable threshold; the flag lowers it.
    let config = write(
        dir.path(),
        "plan.json",
        r#"{"statistic": "GEWMA", "threshold": {"fixed": 1000.0}, "team": {"members": [1, 2, 3, 4]}}"#,
    );
    let series = series.to_str().unwrap();
    let quiet = stdout_json(&outbreak(&["monitor", "--series", series, "--lambda", "0.5", "--config", &config]));
    assert_eq!(quiet["flagged_steps"], 0);
    let loud = stdout_json(&outbreak(&[
        "monitor", "--series", series, "--lambda", "0.5", "--config", &config, "--threshold", "0.8",
    ]));
    assert!(loud["flagged_steps"].as_u64().unwrap() > 0);
}

#[test]
fn calibrate_then_measure_ats() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "scenario.json", SCENARIO);
    let plan = write(
        dir.path(),
        "plan.json",
        r#"{"statistic": "GEWMA", "threshold": {"fixed": 0.0}, "team": {"members": [1, 2, 3, 4]}, "target_ats": 40}"#,
    );
    let tuned = dir.path().join("tuned.json");
    let cal = stdout_json(&outbreak(&[
        "calibrate", "--scenario", &scenario, "--plan", &plan, "--reps", "300", "--seed", "1", "--out",
        tuned.to_str().unwrap(),
    ]));
    let h = cal["threshold"].as_f64().unwrap();
    assert!(h > 0.0);
    let ats = (cal["report"]["mean_tts"].as_f64().unwrap() - 40.0).abs();
    assert!(ats <= 2.0, "calibrated ATS is off by {ats}");

    let report = stdout_json(&outbreak(&[
        "ats", "--scenario", &scenario, "--plan", tuned.to_str().unwrap(), "--reps", "200", "--seed", "2",
    ]));
    let mean = report["mean_tts"].as_f64().unwrap();
    assert!(mean > 0.0 && mean < 20.0, "post-change ATS {mean}");
    assert_eq!(report["reps"], 200);
}

#[test]
fn surrogate_fit_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write(
        dir.path(),
        "grid.json",
        r#"{"n_values": [10, 12, 14, 16], "lambda_values": [0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0],
            "target_ats": 50, "reps": 200, "seed": 9,
            "plan": {"statistic": "TEWMA", "threshold": {"fixed": 0.0}}}"#,
    );
    let doc = dir.path().join("surrogate.json");
    let fit = stdout_json(&outbreak(&["surrogate", "fit", "--grid", &grid, "--kind", "hd", "--out", doc.to_str().unwrap()]));
    assert_eq!(fit["kind"], "HD_LOG");
    assert_eq!(fit["points"].as_array().unwrap().len(), 28);
    let pred = stdout_json(&outbreak(&[
        "surrogate", "predict", "--surrogate", doc.to_str().unwrap(), "--lambda", "0.4", "--n", "13",
    ]));
    let h = pred["threshold"].as_f64().unwrap();
    let hs: Vec<f64> = fit["points"].as_array().unwrap().iter().map(|p| p["sample"]["h"].as_f64().unwrap()).collect();
    let (lo, hi) = hs.iter().fold((f64::INFINITY, 0.0f64), |(l, u), &x| (l.min(x), u.max(x)));
    assert!(h > 0.5 * lo && h < 2.0 * hi, "prediction {h} outside [{lo}, {hi}]");
}

#[test]
fn exit_codes_separate_bad_input_from_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "t,src,dst,count\n1,1,2,-1\n");
    let out = outbreak(&["monitor", "--series", &bad, "--lambda", "0.5", "--stat", "tewma", "--threshold", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = dir.path().join("missing.csv");
    let out = outbreak(&["monitor", "--series", missing.to_str().unwrap(), "--lambda", "0.5", "--stat", "tewma"]);
    assert_eq!(out.status.code(), Some(2));

    let out = outbreak(&["monitor", "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(1));

    let good = write(dir.path(), "good.csv", "t,src,dst,count\n1,1,2,3\n2,2,1,1\n");
    let out = outbreak(&["monitor", "--series", &good, "--lambda", "0.5", "--stat", "gewma", "--threshold", "1"]);
    assert_eq!(out.status.code(), Some(1), "GEWMA without a team is invalid");
    let out = outbreak(&["monitor", "--series", &good, "--lambda", "-0.5", "--stat", "tewma", "--threshold", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = outbreak(&["monitor", "--series", &good, "--lambda", "0.5", "--stat", "tewma", "--threshold", "1"]);
    assert_eq!(out.status.code(), Some(0));
}
