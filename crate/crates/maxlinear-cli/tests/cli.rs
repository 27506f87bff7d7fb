//! End-to-end runs of the command-line interface.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxlinear"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn maxlinear");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn simulate(dir: &Path, d: usize, n: usize, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let out = dir.join(format!("sim_{d}_{seed}"));
    run_ok(bin()
        .arg("simulate")
        .args(["--d", &d.to_string()])
        .args(["--n", &n.to_string()])
        .args(["--seed", &seed.to_string()])
        .arg("--output-dir")
        .arg(&out));
    (out.join("samples.csv"), out.join("model.json"))
}

#[test]
fn simulate_transform_order_estimate_dag_chain() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, model) = simulate(dir.path(), 4, 5000, 3);
    assert!(samples.exists() && model.exists());

    let tr = dir.path().join("tr");
    run_ok(bin()
        .arg("transform")
        .arg("--input")
        .arg(&samples)
        .arg("--output-dir")
        .arg(&tr));
    assert!(tr.join("transformed.csv").exists());

    let order_dir = dir.path().join("order");
    let stdout = run_ok(bin()
        .arg("order")
        .arg("--input")
        .arg(&samples)
        .args(["--k", "400"])
        .arg("--output-dir")
        .arg(&order_dir)
        .arg("--verbose"));
    assert!(stdout.contains("order:"));
    assert!(order_dir.join("order.json").exists());

    let est_dir = dir.path().join("estimate");
    run_ok(bin()
        .arg("estimate")
        .arg("--input")
        .arg(&samples)
        .arg("--order")
        .arg(order_dir.join("order.json"))
        .args(["--k", "200"])
        .arg("--output-dir")
        .arg(&est_dir)
        .arg("--emit-scalings"));
    let matrix = est_dir.join("matrix_k200.json");
    assert!(matrix.exists());
    assert!(est_dir.join("scalings_k200.json").exists());

    let dag_dir = dir.path().join("dag");
    run_ok(bin()
        .arg("dag")
        .arg("--input")
        .arg(&matrix)
        .args(["--delta", "0.05"])
        .arg("--output-dir")
        .arg(&dag_dir));
    let dag_a = dag_dir.join("dag_delta_0.05.json");
    assert!(dag_a.exists());
    assert!(dag_dir.join("dag_delta_0.05.dot").exists());
    let dot = std::fs::read_to_string(dag_dir.join("dag_delta_0.05.dot")).unwrap();
    assert!(dot.starts_with("digraph {"));

    // a second threshold for compare/stability
    run_ok(bin()
        .arg("dag")
        .arg("--input")
        .arg(&matrix)
        .args(["--delta", "0.1"])
        .arg("--output-dir")
        .arg(&dag_dir));
    let dag_b = dag_dir.join("dag_delta_0.1.json");

    let compare = run_ok(bin().arg("compare").arg(&dag_a).arg(&dag_b));
    let parsed: serde_json::Value = serde_json::from_str(&compare).unwrap();
    assert!(parsed["shd"].is_number());
    assert!(parsed["nshd"].is_number());

    let stability = run_ok(bin().arg("stability").arg(&dag_a).arg(&dag_b));
    let parsed: serde_json::Value = serde_json::from_str(&stability).unwrap();
    assert!(parsed.is_array());
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = simulate(dir.path(), 3, 200, 11);
    let other = dir.path().join("again");
    run_ok(bin()
        .arg("simulate")
        .args(["--d", "3", "--n", "200", "--seed", "11"])
        .arg("--output-dir")
        .arg(&other));
    let first = std::fs::read(&a).unwrap();
    let second = std::fs::read(other.join("samples.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn simulate_from_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let (_, model) = simulate(dir.path(), 3, 50, 5);
    let out = dir.path().join("from-model");
    run_ok(bin()
        .arg("simulate")
        .arg("--model")
        .arg(&model)
        .args(["--n", "50"])
        .arg("--output-dir")
        .arg(&out));
    // same model file and seed reproduce the same sample
    let a = std::fs::read(dir.path().join("sim_3_5/samples.csv")).unwrap();
    let b = std::fs::read(out.join("samples.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pipeline_subcommand_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, _) = simulate(dir.path(), 5, 4000, 21);
    let config = serde_json::json!({
        "input": samples,
        "output_dir": dir.path().join("pipe"),
        "k_order": 250,
        "k_grid_bases": [50, 60],
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
    let stdout = run_ok(bin().arg("pipeline").arg("--config").arg(&config_path));
    assert!(stdout.contains("pipeline finished"));
    assert!(dir.path().join("pipe/report.json").exists());
    assert!(dir.path().join("pipe/nshd_table.csv").exists());
    assert!(dir.path().join("pipe/stability.csv").exists());
}

#[test]
fn pipeline_rejects_missing_input_with_nonzero_exit() {
    let out = bin()
        .arg("pipeline")
        .arg("--input")
        .arg("/nonexistent/file.csv")
        .arg("--output-dir")
        .arg(std::env::temp_dir().join("maxlinear-missing-input"))
        .output()
        .expect("spawn maxlinear");
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ingest"), "stage tag missing: {stderr}");
}

#[test]
fn validate_subcommand_reports_checks() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(bin().arg("validate").arg("--output-dir").arg(dir.path()));
    assert!(stdout.contains("PASS scaling-formulas-vs-atom-moments"));
    assert!(stdout.contains("PASS two-route-recovery-identity"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 10);
    assert!(dir.path().join("validation.json").exists());
}
