use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weylscope"))
        .args(args)
        .env_remove("WEYLSCOPE_THREADS")
        .output()
        .expect("weylscope runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn analyze_fubini_study_reports_the_kahler_spectrum() {
    let out = run(&[
        "analyze",
        "--metric",
        "fubini_study",
        "--point",
        "0.1,-0.2,0.3,0.4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["schema"], "weylscope.report/1");
    let rec = &r["records"][0];
    for (key, expected) in [
        ("s", 12.0),
        ("alpha", 2.0),
        ("beta", -1.0),
        ("gamma", -1.0),
        ("det", 2.0),
    ] {
        assert!(
            (f(&rec[key]) - expected).abs() <= 1e-8,
            "{key} = {}",
            rec[key]
        );
    }
    assert!((f(&rec["alpha_g_f"]) - 1.0).abs() <= 1e-8);
    assert_eq!(rec["det_sign"], "positive");
}

#[test]
fn analyze_accepts_negative_coordinates_and_csv() {
    let out = run(&[
        "analyze",
        "--metric",
        "s2xs2",
        "--point",
        "-0.5,0,0,0.25",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 1);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(&records[0][col("x0")].parse::<f64>().unwrap(), &-0.5);
    let det: f64 = records[0][col("det")].parse().unwrap();
    assert!((det - 2.0 / 27.0).abs() <= 1e-8);
}

#[test]
fn analyze_exit_codes() {
    let flat = run(&["analyze", "--metric", "round_s4", "--point", "0,0,0,0"]);
    assert_eq!(flat.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&flat.stderr).contains("top eigenvalue not simple"));
    assert_eq!(
        run(&["analyze", "--metric", "nosuch", "--point", "0,0,0,0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["analyze", "--metric", "fubini_study", "--point", "0,0,0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "analyze",
            "--metric",
            "fs_perturbed:0.05:7",
            "--point",
            "9,0,0,0"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["analyze", "--point", "0,0,0,0"]).status.code(),
        Some(2)
    );
}

#[test]
fn scan_grid_over_s2xs2() {
    let out = run(&["scan", "--metric", "s2xs2", "--grid", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let records = r["records"].as_array().unwrap();
    assert_eq!(records.len(), 625);
    for rec in records {
        assert!((f(&rec["det"]) - 2.0 / 27.0).abs() <= 1e-8);
    }
    assert_eq!(r["summary"]["verdict"], "conformally-kahler");
    assert_eq!(r["summary"]["points"], 625);
}

#[test]
fn scan_random_perturbation_keeps_positive_determinant() {
    let out = run(&[
        "scan",
        "--metric",
        "fs_perturbed:0.05:7",
        "--random",
        "100",
        "--seed",
        "1",
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let records = r["records"].as_array().unwrap();
    assert_eq!(records.len(), 100);
    assert!(records.iter().all(|rec| f(&rec["det"]) > 0.0));
    assert!(f(&r["summary"]["min_det"]) > 0.0);
}

#[test]
fn scan_with_no_points() {
    let out = run(&["scan", "--metric", "s2xs2", "--grid", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["summary"]["verdict"], "no points");
}

#[test]
fn scan_strict_propagates_point_failures() {
    let lenient = run(&["scan", "--metric", "round_s4", "--random", "3"]);
    assert_eq!(lenient.status.code(), Some(0));
    assert_eq!(json(&lenient)["failures"].as_array().unwrap().len(), 3);
    let strict = run(&["scan", "--metric", "round_s4", "--random", "3", "--strict"]);
    assert_eq!(strict.status.code(), Some(3));
    assert_eq!(run(&["scan", "--metric", "s2xs2"]).status.code(), Some(2));
}

#[test]
fn metric_files_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("fs.json");
    std::fs::write(
        &good,
        r#"{"kind": "potential", "exprs": ["log(1 + x0^2 + x1^2 + x2^2 + x3^2)"], "name": "fs-from-file"}"#,
    )
    .unwrap();
    let from_file = run(&[
        "analyze",
        "--metric",
        good.to_str().unwrap(),
        "--point",
        "0.3,0.1,-0.2,0.5",
    ]);
    let from_catalog = run(&[
        "analyze",
        "--metric",
        "fubini_study",
        "--point",
        "0.3,0.1,-0.2,0.5",
    ]);
    assert_eq!(from_file.status.code(), Some(0));
    let (a, b) = (json(&from_file), json(&from_catalog));
    assert_eq!(a["metric"]["name"], "fs-from-file");
    assert_eq!(a["records"], b["records"]);

    let out = dir.path().join("report.json");
    let written = run(&[
        "analyze",
        "--metric",
        good.to_str().unwrap(),
        "--point",
        "0.3,0.1,-0.2,0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(written.status.code(), Some(0));
    assert_eq!(std::fs::read(&out).unwrap(), from_file.stdout);

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"kind": "components", "exprs": ["1 +"], "name": "bad"}"#,
    )
    .unwrap();
    let failed = run(&[
        "analyze",
        "--metric",
        bad.to_str().unwrap(),
        "--point",
        "0,0,0,0",
    ]);
    assert_eq!(failed.status.code(), Some(2));
    let missing = run(&[
        "analyze",
        "--metric",
        dir.path().join("none.json").to_str().unwrap(),
        "--point",
        "0,0,0,0",
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn catalog_listing() {
    let table = run(&["catalog"]);
    assert_eq!(table.status.code(), Some(0));
    let text = String::from_utf8(table.stdout).unwrap();
    for name in ["flat", "round_s4", "s2xs2", "fubini_study", "fs_perturbed"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    let listing = json(&run(&["catalog", "--json"]))["entries"].clone();
    assert!(listing.as_array().map_or(0, Vec::len) >= 6, "{listing}");
    assert_eq!(
        run(&["catalog", "--name", "s2xs2_unequal:1:3"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(run(&["catalog", "--name", "nosuch"]).status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let oracle = run(&[
        "verify",
        "--suite",
        "oracle",
        "--samples",
        "1000000",
        "--seed",
        "42",
    ]);
    assert_eq!(oracle.status.code(), Some(0));
    let r = json(&oracle);
    assert_eq!(r["suites"][0]["pass"], true);

    let negative = run(&[
        "verify",
        "--suite",
        "einstein",
        "--metric",
        "fs_perturbed:0.03:2",
    ]);
    assert_eq!(negative.status.code(), Some(1));
    let r = json(&negative);
    assert_eq!(r["suites"][0]["pass"], false);
    assert!(r["suites"][0]["counterexample"].is_object());

    assert_eq!(run(&["verify", "--suite", "nosuch"]).status.code(), Some(2));
}
