mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{blobs, write_idx};
use ghcidr::{load_idx, read_indices, rhc_partition, LabeledDataset};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ghcidr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

/// Byte-valued blob fixture written as IDX; returns (images, labels, dataset as loaded).
fn fixture(dir: &Path, name: &str, seed: u64, n: usize) -> (PathBuf, PathBuf, LabeledDataset) {
    let ds = blobs(seed, n, 16, 3, 2, 0.08);
    let images: Vec<u8> = ds
        .features()
        .iter()
        .map(|&x| (x * 255.0).round() as u8)
        .collect();
    let labels: Vec<u8> = ds.labels().iter().map(|&l| l as u8).collect();
    let (img, lab) = write_idx(dir, name, &images, &labels, 4, 4);
    let loaded = load_idx(&img, &lab).unwrap();
    (img, lab, loaded)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn reduce_writes_indices_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab, ds) = fixture(dir.path(), "train", 1, 300);
    let out_path = dir.path().join("kept.txt");
    let report_path = dir.path().join("report.json");
    let out = run(&[
        "reduce",
        "--algorithm",
        "ghcidr",
        "--alpha",
        "0.5",
        "--input",
        s(&img),
        "--labels",
        s(&lab),
        "--output",
        s(&out_path),
        "--report",
        s(&report_path),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let kept = read_indices(&out_path).unwrap();
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["algorithm"], "ghcidr");
    assert_eq!(report["n"], 300);
    assert_eq!(report["reduced_n"], kept.len());
    assert_eq!(report["synthetic"], false);
    assert_eq!(report["num_clusters"], rhc_partition(&ds).len());
    let counts: usize = report["per_class_counts"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap() as usize)
        .sum();
    assert_eq!(counts, kept.len());
    for key in [
        "cluster_size_histogram",
        "wall_time_per_stage",
        "source",
        "conventions",
        "params",
    ] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
}

#[test]
fn report_numbers_carry_nine_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab, _) = fixture(dir.path(), "train", 2, 200);
    let out = run(&[
        "reduce",
        "--algorithm",
        "rhc",
        "--input",
        s(&img),
        "--labels",
        s(&lab),
        "--output-format",
        "json-report",
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let raw = String::from_utf8(out.stdout).unwrap();
    let line = raw
        .lines()
        .find(|l| l.trim_start().starts_with("\"reduction_rate\""))
        .unwrap();
    let number = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let digits = number
        .chars()
        .filter(char::is_ascii_digit)
        .collect::<String>();
    assert!(digits.trim_start_matches('0').len() >= 9, "{number}");
}

#[test]
fn merged_with_preset_and_partition_cache() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab, _) = fixture(dir.path(), "train", 3, 300);
    let cache = dir.path().join("partition.json");
    let args = |out: &Path| {
        vec![
            "reduce".to_string(),
            "--dataset".into(),
            "mnist".into(),
            "--input".into(),
            s(&img).into(),
            "--labels".into(),
            s(&lab).into(),
            "--partition-cache".into(),
            s(&cache).into(),
            "--output-format".into(),
            "json-report".into(),
            "--output".into(),
            s(out).into(),
        ]
    };
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    assert!(bin().args(args(&first)).status().unwrap().success());
    assert!(cache.exists());
    assert!(bin().args(args(&second)).status().unwrap().success());
    let a: Value = serde_json::from_str(&std::fs::read_to_string(first).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(second).unwrap()).unwrap();
    assert_eq!(a["params"]["alpha"].as_f64(), Some(0.85));
    assert_eq!(a["params"]["beta"].as_f64(), Some(0.4));
    assert_eq!(a["reduced_n"], b["reduced_n"]);
    assert!(b["wall_time_per_stage"]
        .get("partition_cache_load")
        .is_some());
    assert!(a["merged_cluster_size_histogram"].is_object());
}

#[test]
fn rhc_csv_output_holds_centroids() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab, ds) = fixture(dir.path(), "train", 4, 150);
    let csv = dir.path().join("centroids.csv");
    let out = run(&[
        "reduce",
        "--algorithm",
        "rhc",
        "--input",
        s(&img),
        "--labels",
        s(&lab),
        "--output",
        s(&csv),
        "--output-format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), rhc_partition(&ds).len());
    assert!(rows.lines().all(|l| l.split(',').count() == 17));
}

#[test]
fn csv_input_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    std::fs::write(
        &path,
        "label,a,b\n0,0.1,0.2\n0,0.15,0.2\n1,0.9,0.8\n1,0.85,0.9\n",
    )
    .unwrap();
    let out = run(&[
        "stats",
        "--format",
        "csv",
        "--has-header",
        "--input",
        s(&path),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n"], 4);
    assert_eq!(report["num_clusters"], 2);
}

#[test]
fn evaluate_reports_proxy_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab, _) = fixture(dir.path(), "train", 5, 300);
    let (timg, tlab, _) = fixture(dir.path(), "test", 6, 60);
    let out = run(&[
        "evaluate",
        "--algorithm",
        "ghcidr",
        "--alpha",
        "0.5",
        "--input",
        s(&img),
        "--labels",
        s(&lab),
        "--test-input",
        s(&timg),
        "--test-labels",
        s(&tlab),
        "--full",
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["metric"], "knn_proxy_accuracy");
    assert_eq!(report["k"], 1);
    let acc = report["reduced_accuracy"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&acc));
    assert!(report["full_accuracy"].as_f64().is_some());
}

#[test]
fn calibrate_beta_reports_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab, _) = fixture(dir.path(), "train", 7, 400);
    let out = run(&[
        "calibrate-beta",
        "--alpha",
        "0.5",
        "--input",
        s(&img),
        "--labels",
        s(&lab),
        "--tolerance",
        "1.0",
    ]);
    let t = text(&out);
    match out.status.code() {
        Some(0) => {
            let report: Value = serde_json::from_slice(&out.stdout).unwrap();
            assert_eq!(report["target_source"], "rhc");
            assert!(report["steps"].as_u64().unwrap() <= 25);
        }
        Some(2) => assert!(t.contains("envelope"), "{t}"),
        other => panic!("unexpected exit {other:?}: {t}"),
    }
    let out = run(&[
        "calibrate-beta",
        "--alpha",
        "0.5",
        "--input",
        s(&img),
        "--labels",
        s(&lab),
        "--target-reduction",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
    assert!(text(&out).contains("envelope"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab, _) = fixture(dir.path(), "train", 8, 50);
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["reduce"]).status.code(), Some(1));
    assert_eq!(
        run(&[
            "reduce",
            "--input",
            s(&img),
            "--labels",
            s(&lab),
            "--algorithm",
            "ghcidr"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        run(&[
            "reduce",
            "--input",
            s(&img),
            "--labels",
            s(&lab),
            "--algorithm",
            "ghcidr",
            "--alpha",
            "1.5"
        ])
        .status
        .code(),
        Some(1)
    );
    let missing = dir.path().join("missing");
    let out = run(&["stats", "--input", s(&missing), "--labels", s(&lab)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("missing"));
    // Labels file used as images: wrong magic.
    let out = run(&["stats", "--input", s(&lab), "--labels", s(&lab)]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0,0.1,0.2\n1,0.3\n").unwrap();
    let out = run(&["stats", "--format", "csv", "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("row 2"), "{}", text(&out));
}
