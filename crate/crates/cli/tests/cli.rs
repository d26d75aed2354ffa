use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use brisk_cli::ScenarioFile;
use serde_json::Value;

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/two_rooms.json")
}

fn brisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brisk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const OPEN_FIELD: &str = r#"{
  "version": "brisk/1",
  "workspace": { "min": [0, 0], "max": [1, 1] },
  "obstacles": [],
  "waypoints": [[0.1, 0.1], [0.9, 0.1], [0.9, 0.9]],
  "noise": 0.001,
  "speed": 1
}"#;

#[test]
fn estimate_reports_ordered_bounds() {
    let out = brisk(&["estimate", sample().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], "brisk/1");
    assert_eq!(v["tool"]["name"], "brisk");
    assert_eq!(v["command"], "estimate");
    let raw = &v["report"]["raw"];
    let (first, second, ariu) = (
        raw["first_order"].as_f64().unwrap(),
        raw["second_order"].as_f64().unwrap(),
        raw["ariu"].as_f64().unwrap(),
    );
    assert!(second <= first && first <= ariu);
    assert!(second > 0.0);
    assert!(v["report"]["monte_carlo"].is_null());
}

#[test]
fn echoed_scenario_round_trips() {
    let out = brisk(&["estimate", sample().to_str().unwrap()]);
    let v = json(&out);
    let echoed: ScenarioFile = serde_json::from_value(v["scenario"].clone()).unwrap();
    let original = ScenarioFile::read(&sample()).unwrap();
    assert_eq!(echoed, original);
    assert_eq!(ScenarioFile::parse(&echoed.emit()).unwrap(), original);
}

#[test]
fn open_field_has_zero_risk() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "open.json", OPEN_FIELD);
    let out = brisk(&["estimate", &path, "--mc", "--mc-paths", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for method in ["first_order", "second_order", "ariu", "discrete_time"] {
        assert_eq!(v["report"]["raw"][method], 0.0, "{method}");
    }
    assert_eq!(v["report"]["monte_carlo"]["p_hat"], 0.0);

    let out = brisk(&["compare", &path, "--rd", "1", "--mc-paths", "500", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).filter(|l| l.contains("discrete_time")).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains(",1,"));
}

#[test]
fn malformed_scenario_exits_one_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        &dir,
        "bad.json",
        &OPEN_FIELD.replace("\"noise\": 0.001", "\"noise\": \"loud\""),
    );
    let out = brisk(&["estimate", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("noise"), "{err}");
}

#[test]
fn contact_is_reported_as_saturated() {
    let dir = tempfile::tempdir().unwrap();
    let text = OPEN_FIELD.replace(
        "\"obstacles\": []",
        r#""obstacles": [{ "type": "box", "min": [0.4, 0.0], "max": [0.6, 0.2] }]"#,
    );
    let out = brisk(&["estimate", &write(&dir, "hit.json", &text)]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["report"]["saturated"], true);
    assert_eq!(v["report"]["clamped"]["first_order"], 1.0);
}

#[test]
fn several_rates_are_a_usage_error_for_estimate() {
    let out = brisk(&["estimate", sample().to_str().unwrap(), "--rd", "5,10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_agrees_with_estimate() {
    let path = sample();
    let est = json(&brisk(&["estimate", path.to_str().unwrap()]));
    let cmp = json(&brisk(&[
        "compare",
        path.to_str().unwrap(),
        "--mc-paths",
        "1000",
        "--scale",
        "1,0.5",
    ]));
    let rows = cmp["rows"].as_array().unwrap();
    let pick = |scale: f64, method: &str| {
        rows.iter()
            .find(|r| r["scale"] == scale && r["method"] == method)
            .map(|r| r["raw"].as_f64().unwrap())
            .unwrap()
    };
    let second = est["report"]["raw"]["second_order"].as_f64().unwrap();
    assert!((pick(1.0, "second_order") - second).abs() < 1e-12);
    assert!(pick(0.5, "first_order") < pick(1.0, "first_order"));
    let discrete = rows
        .iter()
        .filter(|r| r["method"] == "discrete_time" && r["scale"] == 1.0)
        .count();
    assert_eq!(discrete, 7);
}

#[test]
fn bench_is_reproducible() {
    let run = || {
        let out = brisk(&[
            "bench",
            "--count",
            "2",
            "--seed",
            "9",
            "--mc-paths",
            "500",
            "--format",
            "csv",
            "--per-scenario",
        ]);
        assert_eq!(out.status.code(), Some(0));
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a[0], "scenario,method,value,mc,mc_stderr");
    assert_eq!(a.len(), 1 + 2 * 5);
}

#[test]
fn bench_emits_scenarios_that_parse() {
    let dir = tempfile::tempdir().unwrap();
    let emit = dir.path().join("gen");
    let out = brisk(&[
        "bench",
        "--count",
        "1",
        "--mc-paths",
        "200",
        "--emit-dir",
        emit.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let file = ScenarioFile::read(&emit.join("scenario_000.json")).unwrap();
    assert_eq!(file.noise, brisk_cli::scenario::NoiseSpec::Scalar(1e-3));
}

#[test]
fn simulate_trace_lists_every_state() {
    let out = brisk(&["simulate", sample().to_str().unwrap(), "--trace", "2", "--rd", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path,t,x,y,in_obstacle");
    // Start plus three substeps on each of four segments, per path.
    assert_eq!(lines.len() - 1, 2 * (1 + 4 * 3));
    assert!(lines[1].starts_with("0,0.0,0.1,0.1,"));
}

#[test]
fn render_draws_the_expected_ellipses() {
    let out = brisk(&[
        "render",
        sample().to_str().unwrap(),
        "--ellipses",
        "0.5,0.95",
        "--per-segment",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let svg = String::from_utf8(out.stdout).unwrap();
    assert!(svg.starts_with("<svg"));
    // One start ellipse plus two per segment, for each level.
    assert_eq!(svg.matches("class=\"confidence\"").count(), 2 * (1 + 4 * 2));
    assert_eq!(svg.matches("class=\"obstacle\"").count(), 3);
    // The deviation starts at zero, so the first ellipses are points.
    assert!(svg.contains("cx=\"0.1\" cy=\"0.1\" rx=\"0\" ry=\"0\""));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.txt");
    let out = brisk(&[
        "estimate",
        sample().to_str().unwrap(),
        "--format",
        "text",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.contains("second_order"));
}
