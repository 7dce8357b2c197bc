use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixkrig::problems::problem_by_name;
use mixkrig::DesignSpace;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixkrig"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn column(dir: &Path, name: &str, col: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(dir.join(name)).unwrap();
    let idx = reader.headers().unwrap().iter().position(|h| h == col).unwrap();
    reader.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

/// Writes a DoE and its outputs for a built-in problem.
fn training_data(dir: &Path, problem: &str, n: usize, seed: u64) {
    ok(dir, &["sample", "--problem", problem, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", "doe.csv"]);
    ok(dir, &["evaluate", "--problem", problem, "--x", "doe.csv", "--out", "y.csv"]);
}

#[test]
fn sample_writes_valid_deterministic_rows() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["problem-space", "--problem", "mlp", "--out", "mlp.json"]);
    let space = DesignSpace::from_json(&read(dir, "mlp.json")).unwrap();
    for name in ["a.csv", "b.csv"] {
        ok(dir, &["sample", "--space", "mlp.json", "--criterion", "ese", "--n", "100", "--seed", "42", "--out", name]);
    }
    assert_eq!(read(dir, "a.csv"), read(dir, "b.csv"));
    let mut reader = csv::Reader::from_path(dir.join("a.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["l", "r", "alpha", "a", "b", "n1", "n2", "n3"]);
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let fields: Vec<&str> = record.iter().collect();
        let values = space.parse_point(&fields).unwrap();
        assert!(space.is_valid(&space.correct(&values).unwrap()));
        assert_eq!(space.correct(&values).unwrap().values, values);
        rows += 1;
    }
    assert_eq!(rows, 100);
    assert!(dir.join("a.csv.manifest.json").exists());
}

#[test]
fn sample_rejects_bad_requests() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&run(dir, &["sample", "--problem", "toy", "--n", "0", "--out", "d.csv"])), 2);
    std::fs::write(dir.join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&run(dir, &["sample", "--space", "bad.json", "--n", "3", "--out", "d.csv"])), 2);
    assert_eq!(code(&run(dir, &["sample", "--space", "missing.json", "--n", "3", "--out", "d.csv"])), 1);
    assert_eq!(code(&run(dir, &["sample", "--n", "3", "--out", "d.csv"])), 2);
    std::fs::write(dir.join("blocker"), "").unwrap();
    assert_eq!(code(&run(dir, &["sample", "--problem", "toy", "--n", "3", "--out", "blocker/d.csv"])), 1);
}

#[test]
fn mlp_fit_report_and_interpolation() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["sample", "--problem", "mlp", "--criterion", "ese", "--n", "100", "--seed", "42", "--out", "doe.csv"]);
    ok(dir, &["evaluate", "--problem", "mlp", "--x", "doe.csv", "--out", "y.csv"]);
    let out = ok(
        dir,
        &[
            "fit", "--problem", "mlp", "--doe", "doe.csv", "--y", "y.csv", "--corr", "abs_exp", "--cat-kernel",
            "HOMO_HSPHERE", "--hier-kernel", "ALG_KERNEL", "--out", "model.json",
        ],
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_hyperparameters"], 10);
    assert!(report["train_rmse"].as_f64().unwrap() < 1e-7);

    ok(dir, &["predict", "--model", "model.json", "--x", "doe.csv", "--out", "pred.csv", "--variances"]);
    let y = column(dir, "y.csv", "y");
    let mean = column(dir, "pred.csv", "mean");
    let var = column(dir, "pred.csv", "variance");
    for i in 0..y.len() {
        assert!((mean[i] - y[i]).abs() < 1e-6);
        assert!(var[i].abs() < 1e-6);
    }
    let derivative = run(dir, &["predict", "--model", "model.json", "--x", "doe.csv", "--out", "d.csv", "--derivatives"]);
    assert_eq!(code(&derivative), 2);
    assert!(String::from_utf8_lossy(&derivative.stderr).contains("unsupported"));
}

#[test]
fn derivative_columns_for_float_variables() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    training_data(dir, "branin-mixed", 12, 3);
    ok(dir, &["fit", "--problem", "branin-mixed", "--doe", "doe.csv", "--y", "y.csv", "--n-starts", "2", "--out", "m.json"]);
    ok(dir, &["predict", "--model", "m.json", "--x", "doe.csv", "--out", "p.csv", "--variances", "--derivatives"]);
    let header = read(dir, "p.csv").lines().next().unwrap().to_string();
    assert_eq!(header, "mean,variance,d_mean/x2,d_variance/x2");
}

#[test]
fn fit_schema_errors() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    training_data(dir, "toy", 6, 1);
    std::fs::write(dir.join("short.csv"), "y\n1.0\n2.0\n").unwrap();
    let mismatch = run(dir, &["fit", "--problem", "toy", "--doe", "doe.csv", "--y", "short.csv", "--out", "m.json"]);
    assert_eq!(code(&mismatch), 2);
    std::fs::write(dir.join("wrong.csv"), "x,z\n0.5,1\n").unwrap();
    std::fs::write(dir.join("one.csv"), "y\n1.0\n").unwrap();
    assert_eq!(code(&run(dir, &["fit", "--problem", "toy", "--doe", "wrong.csv", "--y", "one.csv", "--out", "m.json"])), 2);
    std::fs::write(dir.join("label.csv"), "x,c1\n0.5,eleven\n").unwrap();
    assert_eq!(code(&run(dir, &["fit", "--problem", "toy", "--doe", "label.csv", "--y", "one.csv", "--out", "m.json"])), 2);
    assert_eq!(code(&run(dir, &["fit", "--problem", "toy", "--doe", "doe.csv", "--y", "y.csv", "--cat-kernel", "NOPE", "--out", "m.json"])), 2);
    assert_eq!(code(&run(dir, &["predict", "--model", "absent.json", "--x", "doe.csv", "--out", "p.csv"])), 1);
}

#[test]
fn duplicate_points_without_nugget_are_numerical_failures() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("x.csv"), "x,c1\n0.5,3\n0.5,3\n0.2,1\n").unwrap();
    std::fs::write(dir.join("y.csv"), "y\n1.0\n2.0\n0.0\n").unwrap();
    let out = run(dir, &["fit", "--problem", "toy", "--doe", "x.csv", "--y", "y.csv", "--nugget", "0", "--out", "m.json"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn single_point_fit_succeeds() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("x.csv"), "x,c1\n0.25,4\n").unwrap();
    std::fs::write(dir.join("y.csv"), "y\n3.5\n").unwrap();
    ok(dir, &["fit", "--problem", "toy", "--doe", "x.csv", "--y", "y.csv", "--out", "m.json"]);
    ok(dir, &["predict", "--model", "m.json", "--x", "x.csv", "--out", "p.csv"]);
    assert_eq!(column(dir, "p.csv", "mean"), [3.5]);
}

#[test]
fn ask_proposes_one_new_valid_point() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    training_data(dir, "goldstein-hier", 15, 2);
    ok(
        dir,
        &[
            "ask", "--problem", "goldstein-hier", "--doe", "doe.csv", "--y", "y.csv", "--n-starts", "2", "--max-evals",
            "60", "--out", "next.csv",
        ],
    );
    let space = problem_by_name("goldstein-hier").unwrap().space;
    let text = read(dir, "next.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    let values = space.parse_point(&fields).unwrap();
    assert!(space.is_valid(&space.correct(&values).unwrap()));
    assert!(!read(dir, "doe.csv").lines().skip(1).any(|l| l == lines[1]));
}

fn tree(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.ends_with("manifest.json") {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read_to_string(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn optimize_outputs_are_complete_and_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let base = [
        "optimize", "--problem", "toy", "--doe-size", "5", "--n-iter", "3", "--runs", "3", "--seed", "7", "--cat-kernel",
        "GOWER,HOMO_HSPHERE", "--random", "--n-starts", "2", "--max-evals", "40",
    ];
    let mut first = base.to_vec();
    first.extend(["--jobs", "1", "--out", "a"]);
    let mut second = base.to_vec();
    second.extend(["--jobs", "2", "--out", "b"]);
    ok(dir, &first);
    ok(dir, &second);
    let a = tree(&dir.join("a"));
    assert_eq!(a, tree(&dir.join("b")));

    for variant in ["GOWER-ALG", "HOMO_HSPHERE-ALG", "random"] {
        for r in 0..3 {
            let run = read(&dir.join("a").join(variant), &format!("run_{r:03}.csv"));
            let lines: Vec<&str> = run.lines().collect();
            assert_eq!(lines[0], "iter,x,c1,y,best");
            assert_eq!(lines.len(), 1 + 5 + 3);
        }
        let conv = read(&dir.join("a").join(variant), "convergence.csv");
        assert_eq!(conv.lines().next().unwrap(), "iter,median,q1,q3");
        assert_eq!(conv.lines().count(), 1 + 4);
    }
    let manifests: Vec<_> = std::fs::read_dir(dir.join("a"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("manifest"))
        .collect();
    assert_eq!(manifests.len(), 1);
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.join("a"), "manifest.json")).unwrap();
    assert_eq!(manifest["format_version"], 1);
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["budgets"]["n_iter"], 3);

    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("a"), "summary.json")).unwrap();
    let variants = summary["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 3);
    for v in variants {
        assert_eq!(v["best_per_run"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn branin_optimize_reaches_known_optimum() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "optimize", "--problem", "branin-mixed", "--doe-size", "10", "--n-iter", "20", "--seed", "42", "--cat-kernel",
            "GOWER", "--out", "out",
        ],
    );
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("out"), "summary.json")).unwrap();
    let best = summary["variants"][0]["best_per_run"][0].as_f64().unwrap();
    assert!((best - 0.494).abs() <= 1.0, "{best}");
}

#[test]
fn optimize_rejects_unknown_problem() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["optimize", "--problem", "rosenbrock", "--doe-size", "4", "--out", "o"]);
    assert_eq!(code(&out), 2);
}
