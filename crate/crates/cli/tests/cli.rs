use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TOY: &str = "x1,x2,x3,y\n1,0,1,A\n1,0,0,B\n0,0,1,B\n1,1,1,B\n";

fn rolltree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rolltree"))
        .args(args)
        .env_remove("ROLLTREE_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn rolltree")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn toy(dir: &TempDir) -> String {
    let p = dir.path().join("toy.csv");
    fs::write(&p, TOY).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn fit_gini_reaches_full_accuracy() {
    let dir = TempDir::new().unwrap();
    let input = toy(&dir);
    let model = path(&dir, "model.json");
    let out = rolltree(&[
        "fit", "--input", &input, "--label", "y", "--method", "rst-g", "--depth", "3", "--output",
        &model,
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("training accuracy: 1.000"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["format_version"], 1);
    assert!(json["schema"].is_object());
}

#[test]
fn fit_misclassification_terminates_at_root() {
    let dir = TempDir::new().unwrap();
    let input = toy(&dir);
    let model = path(&dir, "model.json");
    let out = rolltree(&[
        "fit", "--input", &input, "--label", "y", "--method", "rst-m", "--depth", "3", "--output",
        &model,
    ]);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("training accuracy: 0.750"));
    assert!(text(&out.stderr).contains("premature termination at root"));
    assert!(text(&out.stdout).contains("leaves: 1"));
}

#[test]
fn predict_round_trip_and_schema_mismatch() {
    let dir = TempDir::new().unwrap();
    let input = toy(&dir);
    let model = path(&dir, "model.json");
    assert!(
        rolltree(&["fit", "--input", &input, "--label", "y", "--output", &model])
            .status
            .success()
    );

    let preds = path(&dir, "pred.csv");
    let out = rolltree(&[
        "predict", "--model", &model, "--input", &input, "--label", "y", "--output", &preds,
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(
        fs::read_to_string(&preds).unwrap(),
        "prediction\nA\nB\nB\nB\n"
    );
    assert!(text(&out.stderr).contains("accuracy: 1.000"));

    let other = path(&dir, "other.csv");
    fs::write(&other, "a,b\n1,0\n").unwrap();
    let out = rolltree(&["predict", "--model", &model, "--input", &other]);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("schema mismatch"), "{err}");
    assert_eq!(err.trim().lines().count(), 1, "{err}");
}

#[test]
fn unreadable_input_and_bad_flags_fail() {
    let out = rolltree(&["fit", "--input", "/nonexistent/x.csv"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).starts_with("error:"));

    let out = rolltree(&["fit", "--builtin", "toy", "--no-such-flag"]);
    assert!(!out.status.success());

    let out = rolltree(&["fit", "--builtin", "toy", "--method", "xgboost"]);
    assert!(!out.status.success());
}

#[test]
fn binarize_writes_matrix_and_schema() {
    let dir = TempDir::new().unwrap();
    let input = toy(&dir);
    let bin = path(&dir, "bin.csv");
    let schema = path(&dir, "schema.json");
    let out = rolltree(&[
        "binarize", "--input", &input, "--label", "y", "--output", &bin, "--schema", &schema,
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(&bin).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 7);
    assert!(Path::new(&schema).exists());
}

fn cv(dir: &TempDir, threads: &str, out_name: &str) -> (Output, String) {
    let report = path(dir, out_name);
    let out = rolltree(&[
        "--threads",
        threads,
        "cv",
        "--builtin",
        "monks1",
        "--method",
        "cart-g,rst-g",
        "--depth",
        "2,3",
        "--folds",
        "3",
        "--seed",
        "7",
        "--output",
        &report,
    ]);
    (out, report)
}

#[test]
fn cv_is_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let (a, ra) = cv(&dir, "1", "a.json");
    let (b, rb) = cv(&dir, "3", "b.json");
    assert!(a.status.success(), "{}", text(&a.stderr));
    assert!(b.status.success());
    assert_eq!(fs::read(&ra).unwrap(), fs::read(&rb).unwrap());
    assert_eq!(a.stdout, b.stdout);
    assert!(text(&a.stdout).contains("test accuracy (%)"));

    let wt = path(&dir, "wt.json");
    let out = rolltree(&["compare", "--input", &ra, "--output", &wt]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("rst-g"));
    let table: serde_json::Value = serde_json::from_str(&fs::read_to_string(&wt).unwrap()).unwrap();
    assert!(table["rows"].is_array());
}

#[test]
fn bench_reports_each_depth() {
    let out = rolltree(&["bench", "--n", "500", "--p", "12", "--depth", "2,3"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("500 x 12 (hybrid)"));
    assert_eq!(s.lines().count(), 4);
}
