use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gcs_kriging::design::slhd;
use gcs_kriging::experiments::TestFunction;
use gcs_kriging::gp::{read_points_csv, Dataset, GpModel};
use gcs_kriging::kernels::InputSchema;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gcs-kriging"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FIT_CONFIG: &str = r#"{
    "schema": {"continuous": ["x"], "categorical": [{"name": "u", "levels": 4}]},
    "kernel": {
        "continuous": [{"input": "x", "family": "matern52"}],
        "categorical": [{"input": "u", "type": "gcs", "groups": [[1, 2], [3, 4]],
                         "between": "general", "within": "cs"}]
    },
    "combination": "product",
    "fit": {"n_starts": 3, "seed": 11}
}"#;

fn schema4() -> InputSchema {
    InputSchema::one_by_one(4)
}

fn training_csv(path: &Path) {
    let d = slhd(4, 4, 1, 5).unwrap();
    let y: Vec<f64> = d
        .points
        .iter()
        .map(|p| (5.0 * p.x[0]).sin() + if p.u[0] > 2 { 0.5 * p.x[0] } else { 0.0 } + 0.1 * p.u[0] as f64)
        .collect();
    let ds = Dataset::new(schema4(), d.points, y).unwrap();
    ds.write_csv(fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn validate_non_psd_matrix_exits_one_and_names_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    // Two groups of two; group 1 has zero block mean but correlates with group 2.
    fs::write(
        &path,
        "1,-1,0.5,0.5\n-1,1,0.5,0.5\n0.5,0.5,1,0.2\n0.5,0.5,0.2,1\n",
    )
    .unwrap();
    let out = run(&["validate", "--data", s(&path), "--partition", "2,2"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["is_psd"], false);
    let checks = report["failing_checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(checks.iter().all(|c| stderr.contains(c["check"].as_str().unwrap())));
}

#[test]
fn validate_valid_matrix_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(&path, "1,0.3,0.2,0.2\n0.3,1,0.2,0.2\n0.2,0.2,1,0.5\n0.2,0.2,0.5,1\n").unwrap();
    let out = run(&["validate", "--data", s(&path), "--partition", "2,2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, FIT_CONFIG).unwrap();
    let out = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&cfg, "{\"kernel\": [1,\n 2").unwrap();
    let out = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn fit_then_predict_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let train = dir.path().join("train.csv");
    let model = dir.path().join("model.json");
    let test = dir.path().join("test.csv");
    let pred = dir.path().join("pred.csv");
    fs::write(&cfg, FIT_CONFIG).unwrap();
    training_csv(&train);
    let out = run(&["fit", "--config", s(&cfg), "--data", s(&train), "--out", s(&model), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["design", "--kind", "slhd", "--points-per-level", "5", "--levels", "4", "--seed", "9", "--out", s(&test)]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["predict", "--model", s(&model), "--data", s(&test), "--out", s(&pred)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let m = GpModel::load(&model).unwrap();
    let (points, _) = read_points_csv(fs::File::open(&test).unwrap(), &schema4(), false).unwrap();
    let (mean, var) = m.predict(&points).unwrap();

    let mut rdr = csv::Reader::from_path(&pred).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), points.len());
    for (i, r) in rows.iter().enumerate() {
        let mu: f64 = r[2].parse().unwrap();
        let v: f64 = r[3].parse().unwrap();
        assert!((mu - mean[i]).abs() <= 1e-12, "row {i}: {mu} vs {}", mean[i]);
        assert!((v - var[i]).abs() <= 1e-12);
    }
}

#[test]
fn export_correlation_has_unit_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let train = dir.path().join("train.csv");
    let model = dir.path().join("model.json");
    let corr = dir.path().join("corr.csv");
    fs::write(&cfg, FIT_CONFIG).unwrap();
    training_csv(&train);
    assert_eq!(run(&["fit", "--config", s(&cfg), "--data", s(&train), "--out", s(&model)]).status.code(), Some(0));
    let out = run(&["export-correlation", "--model", s(&model), "--out", s(&corr)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (c, _) = gcs_kriging::covariance::read_matrix_csv(fs::File::open(&corr).unwrap()).unwrap();
    assert_eq!(c.nrows(), 4);
    for i in 0..4 {
        assert!((c[(i, i)] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn benchmark_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.json");
    fs::write(
        &cfg,
        r#"{
        "fit": {"n_starts": 2},
        "benchmark": {
            "function": "example2",
            "design": {"kind": "slhd", "points_per_level": 2},
            "test_grid": 20,
            "repetitions": 2,
            "variants": [
                {"name": "cs", "kernel": {"categorical": [{"input": "u", "type": "cs"}]}},
                {"name": "two groups", "kernel": {"categorical": [{"input": "u", "type": "gcs",
                    "groups": [[1,2,3,4],[5,6,7,8,9,10]], "between": "general", "within": "cs"}]}}
            ]
        }
    }"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(&["benchmark", "--config", s(&cfg), "--out", s(d), "--seed", "3"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--config", "x.json"]).status.code(), Some(2));
    assert_eq!(run(&["validate"]).status.code(), Some(2));
    assert_eq!(run(&["predict", "--model", "/does/not/exist.json", "--data", "x.csv"]).status.code(), Some(2));
}

#[test]
fn malformed_data_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let train = dir.path().join("train.csv");
    fs::write(&cfg, FIT_CONFIG).unwrap();
    fs::write(&train, "x,u,y\n0.1,1,0.5\n0.2,abc,0.1\n").unwrap();
    let out = run(&["fit", "--config", s(&cfg), "--data", s(&train), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("'u'"), "{err}");
}

#[test]
fn design_stratified_levels_round_robin() {
    let out = run(&["design", "--kind", "stratified", "--points-per-level", "3", "--levels", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,u");
    assert_eq!(lines.len(), 31);
    for level in 1..=TestFunction::Example2.level_count() {
        let suffix = format!(",{level}");
        assert_eq!(lines[1..].iter().filter(|l| l.ends_with(&suffix)).count(), 3);
    }
}
