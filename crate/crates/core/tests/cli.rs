use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde::Deserialize;
use tempfile::TempDir;

use mwkmeans::data::{load_csv, CsvOptions};
use mwkmeans::model::RunReportJson;

fn mwk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[allow(dead_code)]
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RestartSummary {
    seed: u64,
    objective: f64,
    normalised_objective: Option<f64>,
    iterations: usize,
    converged: bool,
}

#[allow(dead_code)]
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterOutput {
    input: String,
    feature_names: Option<Vec<String>>,
    best_index: usize,
    best: RunReportJson,
    restarts: Vec<RestartSummary>,
}

fn two_blobs(dir: &TempDir) -> std::path::PathBuf {
    let file = dir.path().join("blobs.csv");
    fs::write(
        &file,
        "x,y\n0.0,0.1\n0.2,0.0\n0.1,0.2\n5.0,5.1\n5.2,5.0\n5.1,5.2\n",
    )
    .unwrap();
    file
}

#[test]
fn cluster_writes_a_parseable_report() {
    let dir = TempDir::new().unwrap();
    let input = two_blobs(&dir);
    let out = mwk(&["cluster", "--input", path(&input), "--k", "2", "--p", "1.5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: ClusterOutput = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        report.feature_names.as_deref(),
        Some(&["x".to_string(), "y".to_string()][..])
    );
    assert_eq!(report.restarts.len(), 20);
    assert_eq!(report.best.weights.len(), 2);
    for row in &report.best.weights {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let a = &report.best.assignments;
    assert!(a[0] == a[1] && a[1] == a[2] && a[3] == a[4] && a[4] == a[5] && a[0] != a[3]);
    let best = report.restarts[report.best_index].objective;
    assert!(report.restarts.iter().all(|r| r.objective >= best));
}

#[test]
fn cluster_to_file_matches_stdout() {
    let dir = TempDir::new().unwrap();
    let input = two_blobs(&dir);
    let target = dir.path().join("report.json");
    let args = [
        "cluster",
        "--input",
        path(&input),
        "--k",
        "2",
        "--p",
        "3",
        "--restarts",
        "3",
    ];
    let stdout = mwk(&args).stdout;
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path(&target)]);
    assert_eq!(code(&mwk(&with_out)), 0);
    assert_eq!(fs::read(&target).unwrap(), stdout);
}

#[test]
fn cluster_trace_emits_one_line_per_iteration() {
    let dir = TempDir::new().unwrap();
    let input = two_blobs(&dir);
    let out = mwk(&[
        "cluster",
        "--input",
        path(&input),
        "--k",
        "2",
        "--p",
        "2",
        "--restarts",
        "2",
        "--trace",
    ]);
    assert_eq!(code(&out), 0);
    let report: ClusterOutput = serde_json::from_slice(&out.stdout).unwrap();
    let iterations: usize = report.restarts.iter().map(|r| r.iterations).sum();
    let lines: Vec<serde_json::Value> = stderr(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), iterations);
    assert!(lines[0]["event"]["objective"].is_f64());
}

#[test]
fn invalid_arguments_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = two_blobs(&dir);
    let out = mwk(&["cluster", "--input", path(&input), "--k", "0", "--p", "2"]);
    assert_eq!(code(&out), 2);

    let out = mwk(&["cluster", "--input", path(&input), "--k", "2", "--p", "1.0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("p > 1"), "{}", stderr(&out));

    let out = mwk(&["cluster", "--input", path(&input), "--k", "7", "--p", "2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_or_malformed_input_exits_3() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = mwk(&["cluster", "--input", path(&missing), "--k", "2", "--p", "2"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("nope.csv"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,x\n").unwrap();
    let out = mwk(&["cluster", "--input", path(&bad), "--k", "1", "--p", "2"]);
    assert_eq!(code(&out), 3);
    assert!(
        stderr(&out).contains("line 2, column 2"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn generate_defaults_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(
        code(&mwk(&["generate", "--seed", "9", "--out", path(&a)])),
        0
    );
    assert_eq!(
        code(&mwk(&["generate", "--seed", "9", "--out", path(&b)])),
        0
    );
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let data = load_csv(
        &a,
        CsvOptions {
            labels_column: true,
        },
    )
    .unwrap();
    assert_eq!((data.n(), data.m()), (1000, 8));
    assert_eq!(data.labels.as_ref().unwrap().iter().max(), Some(&2));
    assert!(dir.path().join("a.csv.spec.json").exists());
}

#[test]
fn generate_normalised_writes_stats() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("n.csv");
    let status = mwk(&[
        "generate",
        "--n-points",
        "50",
        "--normalise",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&status), 0);
    let data = load_csv(
        &out,
        CsvOptions {
            labels_column: true,
        },
    )
    .unwrap();
    for col in data.values().columns() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((max - min - 1.0).abs() < 1e-12);
    }
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("n.csv.stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats.as_array().unwrap().len(), 8);
}

#[test]
fn generate_rejects_too_few_points() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    let status = mwk(&[
        "generate",
        "--n-points",
        "2",
        "--k-true",
        "3",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&status), 2);
}

#[test]
fn experiment_writes_one_row_per_run() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("exp");
    let status = mwk(&[
        "experiment",
        "--n-points",
        "60",
        "--n-datasets",
        "1",
        "--restarts",
        "1",
        "--p-values",
        "2",
        "--out-dir",
        path(&out_dir),
    ]);
    assert_eq!(code(&status), 0, "{}", stderr(&status));

    let objectives = fs::read_to_string(out_dir.join("normalised_objective.csv")).unwrap();
    let lines: Vec<&str> = objectives.lines().collect();
    assert_eq!(lines[0], "dataset,p,run,value");
    assert_eq!(lines.len(), 2);
    let value: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&value));

    let aggregated = fs::read_to_string(out_dir.join("weights_sorted_aggregated.csv")).unwrap();
    assert_eq!(aggregated.lines().count(), 1 + 8);
    let per_cluster = fs::read_to_string(out_dir.join("weights_sorted.csv")).unwrap();
    assert_eq!(per_cluster.lines().count(), 1 + 3 * 8);
    for name in [
        "weights_sorted.csv",
        "weights_sorted_aggregated.csv",
        "normalised_objective.csv",
    ] {
        load_csv(&out_dir.join(name), CsvOptions::default()).unwrap();
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["total_runs"], 1);
    assert!(out_dir.join("experiment_spec.json").exists());
}

#[test]
fn verify_passes_and_reports_injected_faults() {
    let out = mwk(&["verify", "--trials", "200"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 12);

    let out = mwk(&["verify", "--trials", "50", "--inject-fault", "ratio_law"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("check failed: ratio_law"));

    let out = mwk(&["verify", "--inject-fault", "no_such_check"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_with_many_trials() {
    let out = mwk(&["verify", "--trials", "10000"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}
