use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cpmiss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpmiss"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cpmiss(args);
    assert!(
        out.status.success(),
        "cpmiss {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_summarize() {
    let dir = TempDir::new().unwrap();
    let results = dir.path().join("results.csv");
    ok(&[
        "simulate",
        "--seed",
        "7",
        "--iterations",
        "3",
        "--configs",
        "0,1",
        "--n",
        "600",
        "--m",
        "2",
        "--workers",
        "2",
        "--out",
        path(&results),
    ]);
    let text = std::fs::read_to_string(&results).unwrap();
    assert!(text.starts_with("config_id,iteration,seed,mechanism,method,strategy,variant,"));
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 31);

    let summary = ok(&[
        "summarize",
        "--in",
        path(&results),
        "--group-by",
        "method,strategy",
        "--filter",
        "method=MI",
    ]);
    let lines: Vec<&str> = summary.lines().collect();
    assert!(lines[0].starts_with("method,strategy,n_rows,n_errors,n_nonconverged,median_citl"));
    assert_eq!(lines.len(), 1 + 5);
    assert!(lines[1..].iter().all(|l| l.starts_with("MI,")));

    let out = dir.path().join("summary.csv");
    ok(&[
        "summarize",
        "--in",
        path(&results),
        "--stat",
        "mean",
        "--out",
        path(&out),
    ]);
    assert!(std::fs::read_to_string(&out).unwrap().contains("mean_slope"));
}

#[test]
fn export_and_predict() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("model.txt");
    ok(&[
        "export-model",
        "--config",
        "500",
        "--variant",
        "indicator",
        "--seed",
        "3",
        "--n",
        "4000",
        "--out",
        path(&model),
    ]);
    assert!(std::fs::read_to_string(&model)
        .unwrap()
        .starts_with("cpmiss-model v1"));

    let p: f64 = ok(&["predict", "--model", path(&model), "--x2", "0.3", "--x1", "-1.2"])
        .trim()
        .parse()
        .unwrap();
    assert!(p > 0.0 && p < 1.0);
    let q: f64 = ok(&[
        "predict",
        "--model",
        path(&model),
        "--x2",
        "0.3",
        "--allow-missing",
    ])
    .trim()
    .parse()
    .unwrap();
    assert!(q > 0.0 && q < 1.0);

    let refused = cpmiss(&["predict", "--model", path(&model), "--x2", "0.3"]);
    assert!(!refused.status.success());
    assert!(String::from_utf8_lossy(&refused.stderr).contains("missing"));
}

#[test]
fn grid_listing_and_bad_input() {
    let listing = ok(&["grid", "--configs", "mechanism=MCAR"]);
    assert_eq!(listing.lines().count(), 1 + 32);
    assert!(!cpmiss(&["grid", "--configs", "9999"]).status.success());
    assert!(!cpmiss(&["summarize", "--in", "/nonexistent.csv"])
        .status
        .success());
}
