use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_score-lab")).args(args).env_remove("SCORE_LAB_THREADS").output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn verify_bounds_standard_normal_is_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = run(&[
        "verify-bounds",
        "--target.name",
        "std_normal",
        "--theorem",
        "finite-time-hessian",
        "--output",
        &out_arg(&dir),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.join("bounds_finite-time-hessian.csv")).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == "violated").unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| &r[idx] == "false"));
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "verify-bounds");
}

#[test]
fn counterexample_block_four_clears_its_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["counterexample", "--M", "[4]", "--output", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(tmp.path().join("counterexample_blocks.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let row = rdr.records().next().unwrap().unwrap();
    let ratio: f64 = row[1].parse().unwrap();
    let bound: f64 = row[4].parse().unwrap();
    assert!((bound - 16.0 / 3.0).abs() < 1e-15);
    assert!((ratio - 26.976870515060952).abs() < 1e-9);
    assert_eq!(&row[5], "true");
}

#[test]
fn json_format_is_an_array_of_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["counterexample", "--M", "[1,2]", "--format", "json", "--output", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("counterexample_blocks.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["M"], 2.0);
}

#[test]
fn config_errors_exit_two_and_leave_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["verify-bounds", "--target.name", "no_such_target", "--theorem", "finite-time-hessian"],
        &["verify-bounds", "--target.name", "std_normal", "--theorem", "no-such-theorem"],
        &["sample", "--target.name", "std_normal", "--T", "1", "--N", "4", "--ensemble", "8", "--typo", "1"],
        &["verify-bounds", "--target.name", "gaussian", "--target.params.sigma2", "-1", "--theorem", "finite-time-hessian"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let dir = tmp.path().join(format!("case{i}"));
        let mut full: Vec<&str> = args.to_vec();
        let d = out_arg(&dir);
        full.extend(["--output", &d]);
        let o = run(&full);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!dir.exists(), "case {i} left files behind");
    }
}

#[test]
fn config_file_and_overrides_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"target": {"name": "std_normal"}, "T": 4, "N": 16, "ensemble": 64, "seed": 3}"#).unwrap();
    let dir = tmp.path().join("o");
    let o = run(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "9", "--output", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 9);
    let samples = std::fs::read_to_string(dir.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 2 + 64);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["sample", "--target.name", "mixture2", "--T", "3", "--N", "20", "--ensemble", "200", "--seed", "11"];
    let mut bytes = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let dir = tmp.path().join(format!("r{i}"));
        let d = out_arg(&dir);
        let mut args: Vec<&str> = vec![base[0], "--threads", threads];
        args.extend(&base[1..]);
        args.extend(["--output", &d]);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        bytes.push((std::fs::read(dir.join("samples.csv")).unwrap(), std::fs::read(dir.join("sample_metrics.csv")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn converge_reports_a_rate_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "converge",
        "--target.name",
        "std_normal",
        "--T",
        "5",
        "--N",
        "[5,10,20,40]",
        "--ensemble",
        "400",
        "--output",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(tmp.path().join("converge.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("w1_vs_forward")).count(), 4);
    assert!(text.lines().any(|l| l.starts_with("rate_exponent")));
}
