//! End-to-end tests of the installed binary: contract examples for every
//! subcommand, exit-code mapping, and literal round-trips in emitted JSON.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scorelab_core::parse::{parse_distribution, parse_functional, parse_score};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scorelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn score_evaluates_the_median_pinball() {
    let out = run(&["score", "pinball(0.5, G=identity)", "--x", "1", "--y", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "0.5");
}

#[test]
fn score_evaluates_the_joint_tail_score_at_the_origin() {
    let out = run(&["score", "var_es(0.5, G1=zero, G2=exp)", "--x", "0,0", "--y", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "-1");
}

#[test]
fn score_rejects_points_outside_the_action_domain() {
    let out = run(&["score", "var_es(0.5, G1=zero, G2=exp)", "--x", "0,1", "--y", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("action domain"), "{}", stderr(&out));
}

#[test]
fn score_rejects_malformed_literals() {
    let out = run(&["score", "pinball(0.5, G=", "--x", "1", "--y", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_the_bundled_tail_config_and_round_trips_literals() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("reports.json");
    let out = run(&[
        "verify",
        config_path("varesbasic.json").to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("PASS").count(), 2, "{text}");

    let payload: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let cells = payload["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    for cell in cells {
        let score = cell["score"].as_str().unwrap();
        assert_eq!(parse_score(score).unwrap().to_string(), score);
        let functional = cell["functional"].as_str().unwrap();
        assert_eq!(parse_functional(functional).unwrap().to_string(), functional);
        let dist = cell["distribution"].as_str().unwrap();
        assert_eq!(parse_distribution(dist).unwrap().to_string(), dist);
        for check in cell["checks"].as_array().unwrap() {
            assert_eq!(check["passed"], true);
        }
    }
}

#[test]
fn verify_fails_the_concave_tail_override_with_named_checks() {
    let out = run(&["verify", config_path("varesbasic_concave.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("FAIL"), "{text}");
    assert!(text.contains("consistency"), "{text}");
}

#[test]
fn verify_rejects_an_empty_distribution_list() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    fs::write(
        &path,
        r#"{
  "distributions": [],
  "functionals": ["var_es(0.05)"],
  "scores": ["var_es(0.05, G1=zero, G2=exp)"]
}"#,
    )
    .unwrap();
    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no distributions"), "{}", stderr(&out));
}

#[test]
fn verify_rejects_unknown_checks_and_unpaired_scores() {
    let dir = tempfile::tempdir().unwrap();
    let bad_check = dir.path().join("badcheck.json");
    fs::write(
        &bad_check,
        r#"{
  "distributions": ["normal(0, 1)"],
  "functionals": ["quantile(0.5)"],
  "scores": ["pinball(0.5, G=identity)"],
  "checks": ["consistency", "levitation"]
}"#,
    )
    .unwrap();
    let out = run(&["verify", bad_check.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("levitation"), "{}", stderr(&out));

    let unpaired = dir.path().join("unpaired.json");
    fs::write(
        &unpaired,
        r#"{
  "distributions": ["normal(0, 1)"],
  "functionals": ["quantile(0.25)"],
  "scores": ["pinball(0.5, G=identity)"]
}"#,
    )
    .unwrap();
    let out = run(&["verify", unpaired.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no matching functional"), "{}", stderr(&out));
}

#[test]
fn verify_runs_levelset_probes_from_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levelset.json");
    fs::write(
        &path,
        r#"{
  "distributions": ["normal(0, 1)"],
  "functionals": ["quantile(0.5)"],
  "scores": ["pinball(0.5, G=identity)"],
  "checks": ["consistency", "levelset"],
  "levelset_probes": [
    {"functional": "mean_variance", "component": 1, "f0": "normal(0, 1)", "f1": "normal(2, 1)"}
  ]
}"#,
    )
    .unwrap();
    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("LEVELSET"), "{text}");
    assert!(text.contains("violation true"), "{text}");
}

fn write_fixture_table(path: &Path) {
    let mut rows = String::from("period,y,alpha:x1,alpha:x2,beta:x1,beta:x2\n");
    let ys = [-0.3, 0.8, -2.4, 0.1, 1.3, -0.7, -1.9, 0.4, -0.2, 2.1];
    for (i, y) in ys.iter().enumerate() {
        rows.push_str(&format!("p{},{},-1.6,-2.1,-1.1,-1.5\n", i + 1, y));
    }
    fs::write(path, rows).unwrap();
}

#[test]
fn backtest_ranks_methods_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    write_fixture_table(&table);
    let report = dir.path().join("report.json");
    let out = run(&[
        "backtest",
        table.to_str().unwrap(),
        "--score",
        "var_es(0.1, G1=zero, G2=exp)",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("alpha"), "{text}");
    assert!(text.contains("beta"), "{text}");
    assert!(text.contains("rank"), "{text}");
    let payload: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(payload["comparison"]["methods"].as_array().unwrap().len(), 2);
}

#[test]
fn backtest_sweep_reports_rankings_and_stability() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    write_fixture_table(&table);
    let out = run(&[
        "backtest",
        table.to_str().unwrap(),
        "--score",
        "var_es(0.1, G1=zero, G2=exp)",
        "--sweep",
        "var_es(0.1, G1=identity, G2=exp)",
        "--sweep",
        "var_es(0.1, G1=zero, G2=softplus)",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.matches(" < ").count() >= 2, "{text}");
    assert!(text.contains("stability"), "{text}");
}

#[test]
fn backtest_missing_file_is_a_usage_error() {
    let out = run(&["backtest", "/nonexistent/table.csv", "--score", "pinball(0.5, G=identity)"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn osband_recovers_the_squared_loss_h() {
    let out = run(&["osband", "bregman_mean(phi=square_convex)", "--at", "0.3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let h = payload["h"][0][0].as_f64().unwrap();
    assert!((h - 2.0).abs() < 1e-6, "h = {h}");
    assert!(payload["residual"].as_f64().unwrap() < 1e-4);
}

#[test]
fn levelset_flags_the_variance_component() {
    let out = run(&[
        "levelset",
        "mean_variance",
        "--component",
        "1",
        "--f0",
        "normal(0, 1)",
        "--f1",
        "normal(2, 1)",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(payload["violation"], true);
    assert!((payload["max_deviation"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
}

#[test]
fn levelset_rejects_endpoints_that_disagree_on_the_component() {
    let out = run(&[
        "levelset",
        "mean_variance",
        "--component",
        "0",
        "--f0",
        "normal(0, 1)",
        "--f1",
        "normal(2, 1)",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_two() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}
