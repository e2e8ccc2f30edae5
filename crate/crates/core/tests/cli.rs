use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emos::data::{exceedance_column, load_predictions};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sixty_day")
}

fn emos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emos")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = emos(args);
    assert!(out.status.success(), "emos {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn failure(args: &[&str]) -> String {
    let out = emos(args);
    assert!(!out.status.success(), "emos {args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fit_predict(out: &Path, radius: &str) {
    let data = fixture();
    ok(&["fit", "--data-dir", path(&data), "--out-dir", path(out), "--radius-km", radius]);
    ok(&["predict", "--data-dir", path(&data), "--out-dir", path(out), "--radius-km", radius]);
}

#[test]
fn fit_writes_one_row_per_fixture_day() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture();
    ok(&["fit", "--data-dir", path(&data), "--out-dir", path(dir.path())]);
    let text = std::fs::read_to_string(dir.path().join("coefficients.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("valid_day,alpha0,alpha1,alpha2,beta0,beta1,beta2,xi"));
    assert_eq!(lines.len() - 1, 60);
}

#[test]
fn single_point_neighborhood_matches_local_model() {
    let local = tempfile::tempdir().unwrap();
    let single = tempfile::tempdir().unwrap();
    fit_predict(local.path(), "0");
    fit_predict(single.path(), "2");
    let a = std::fs::read(local.path().join("predictions.csv")).unwrap();
    let b = std::fs::read(single.path().join("predictions.csv")).unwrap();
    assert!(a == b, "single-gridpoint neighborhood changed the predictions");
}

#[test]
fn exceedance_columns_match_the_emitted_parameters() {
    let dir = tempfile::tempdir().unwrap();
    fit_predict(dir.path(), "0");
    let file = dir.path().join("predictions.csv");
    let preds = load_predictions(&file).unwrap();
    let mut reader = csv::Reader::from_path(&file).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), preds.len());
    assert!(!rows.is_empty());
    for (row, pred) in rows.iter().zip(&preds) {
        let value = |name: &str| row[col(name)].parse::<f64>().unwrap();
        for t in [0.0, 5.0, 10.0, 15.0] {
            assert_eq!(value(&exceedance_column(t)), 1.0 - pred.params.cdf(t));
        }
        assert_eq!(value("p_zero"), pred.params.prob_zero());
        assert_eq!(value("q50"), pred.params.quantile(0.5).unwrap());
        assert!(value("q10") <= value("q50") && value("q50") <= value("q90"));
    }
}

#[test]
fn verifying_against_itself_gives_zero_skill() {
    let dir = tempfile::tempdir().unwrap();
    fit_predict(dir.path(), "0");
    let data = fixture();
    let preds = dir.path().join("predictions.csv");
    ok(&[
        "verify",
        "--data-dir",
        path(&data),
        "--out-dir",
        path(dir.path()),
        "--reference",
        path(&preds),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["crps"]["skill"], 0.0);
    for t in report["thresholds"].as_array().unwrap() {
        let brier = &t["brier"];
        if brier["reference"] == 0.0 {
            assert!(brier["skill"].is_null());
        } else {
            assert_eq!(brier["skill"], 0.0);
        }
    }
    for t in ["0", "5", "10", "15"] {
        let model = std::fs::read(dir.path().join(format!("reliability_{t}.csv"))).unwrap();
        let reference = std::fs::read(dir.path().join(format!("reliability_reference_{t}.csv"))).unwrap();
        assert_eq!(model, reference);
    }
}

#[test]
fn verify_reports_skill_against_the_raw_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    fit_predict(dir.path(), "0");
    let data = fixture();
    ok(&["verify", "--data-dir", path(&data), "--out-dir", path(dir.path())]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reference"], "raw ensemble");
    assert_eq!(report["n_days"], 60);
    assert!(report["crps"]["model"].as_f64().unwrap() > 0.0);
    let header = std::fs::read_to_string(dir.path().join("reliability_5.csv")).unwrap();
    assert!(header.starts_with("bin_index,lower,upper,count,mean_prob,obs_freq,ci_low,ci_high\n"));
    assert_eq!(header.lines().count(), 12);
}

#[test]
fn simulate_reproduces_the_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "--days",
        "60",
        "--sites",
        "16",
        "--members",
        "8",
        "--seed",
        "60",
        "--out-dir",
        path(dir.path()),
    ]);
    for name in ["forecasts.csv", "observations.csv", "stations.csv", "grid.csv", "truth.csv"] {
        let fresh = std::fs::read(dir.path().join(name)).unwrap();
        let bundled = std::fs::read(fixture().join(name)).unwrap();
        assert!(fresh == bundled, "{name} differs from the bundled fixture");
    }
}

#[test]
fn unknown_flag_is_rejected() {
    let err = failure(&["fit", "--radius", "3"]);
    assert!(err.contains("--radius"), "{err}");
}

#[test]
fn missing_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let err = failure(&["fit", "--data-dir", path(dir.path()), "--out-dir", path(dir.path())]);
    assert!(err.starts_with("error:") && err.contains("forecasts.csv"), "{err}");
}

#[test]
fn schema_violation_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture();
    for name in ["stations.csv", "grid.csv", "observations.csv"] {
        std::fs::copy(data.join(name), dir.path().join(name)).unwrap();
    }
    std::fs::write(
        dir.path().join("forecasts.csv"),
        "valid_time,point_id,member,value\n2011-05-01,g0000,1,0.5\n2011-05-01,g0000,1,0.7\n",
    )
    .unwrap();
    let err = failure(&["fit", "--data-dir", path(dir.path()), "--out-dir", path(dir.path())]);
    assert!(err.contains("forecasts.csv:3:") && err.contains("line 2"), "{err}");

    std::fs::write(dir.path().join("forecasts.csv"), "time,point,member,value\n").unwrap();
    let err = failure(&["fit", "--data-dir", path(dir.path()), "--out-dir", path(dir.path())]);
    assert!(err.contains("valid_time"), "{err}");
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "window_days = 20\nradius = 4\n").unwrap();
    let data = fixture();
    let err = failure(&["fit", "--data-dir", path(&data), "--out-dir", path(dir.path()), "--config", path(&cfg)]);
    assert!(err.contains("run.cfg:2") && err.contains("unknown key 'radius'"), "{err}");

    let err = failure(&["fit", "--data-dir", path(&data), "--thresholds", "5,1"]);
    assert!(err.contains("ascending"), "{err}");
}

#[test]
fn local_coefficients_are_rejected_for_a_neighborhood_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture();
    ok(&["fit", "--data-dir", path(&data), "--out-dir", path(dir.path())]);
    let err = failure(&["predict", "--data-dir", path(&data), "--out-dir", path(dir.path()), "--radius-km", "10"]);
    assert!(err.contains("local model"), "{err}");
}
