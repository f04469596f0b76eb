//! Exit-code and interface contract of the pdflow binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pdflow"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pdflow_cli_{}_{name}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn solve_converges_with_exit_zero() {
    let dir = scratch("solve0");
    let status = bin()
        .args([
            "solve", "--experiment", "random_qp", "--seed", "1", "--n", "10", "--m", "5",
            "--mode", "metric", "--k-mult", "1", "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.join("random_qp_1_metric_1.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("random_qp_1_metric_1_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["outcome"], "converged");
    assert!(summary["final_kkt"]["total"].as_f64().unwrap() <= 1e-6);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_seed_is_a_config_error() {
    let out = bin()
        .args(["solve", "--experiment", "random_qp", "--n", "4", "--m", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("--seed"), "stderr: {msg}");
}

#[test]
fn divergent_run_exits_two() {
    let dir = scratch("div2");
    let status = bin()
        .args([
            "solve", "--experiment", "l2ls", "--seed", "7", "--m", "30", "--n", "50",
            "--alpha", "1", "--beta", "1", "--step", "1", "--k-mult", "1000",
            "--max-iters", "500", "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn l2ls_benchmark_solves_with_stable_gain() {
    let dir = scratch("l2ls");
    let status = bin()
        .args([
            "solve", "--experiment", "l2ls", "--seed", "7", "--m", "30", "--n", "50",
            "--alpha", "stable", "--k-mult", "1000", "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.join("l2ls_7_metric_1000.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn certify_fails_with_exit_two_below_the_pd_threshold() {
    let out = bin()
        .args([
            "certify", "--experiment", "random_qp", "--seed", "1", "--n", "10", "--m", "5",
            "--k-abs", "0.1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("not positive definite"), "stderr: {msg}");
}

#[test]
fn certify_emits_the_documented_json_fields() {
    let dir = scratch("cert");
    let out = bin()
        .args([
            "certify", "--experiment", "random_qp", "--seed", "3", "--n", "8", "--m", "4",
            "--k-mult", "1", "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["k", "q1", "q2", "rho", "nu", "ell", "nu_ge_q1_half", "passed"] {
        assert!(doc.get(key).is_some(), "missing certificate field {key}");
    }
    assert_eq!(doc["passed"], true);
    assert!(dir.join("random_qp_3_metric_1_certificate.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = scratch("cfg");
    let config = serde_json::json!({
        "experiment": "random_qp",
        "seed": 11,
        "n": 6,
        "m": 2,
        "hessian_scale": 5.0,
        "mode": "metric",
        "k_mult": 1.0,
        "tol": 1e-8
    });
    let cfg_path = dir.join("run.json");
    std::fs::write(&cfg_path, config.to_string()).unwrap();

    // flag overrides the file's seed
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "12", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.join("random_qp_12_metric_1.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn custom_problem_files_round_trip_through_solve() {
    let dir = scratch("custom");
    let program = pdflow::problem::make_random_qp(21, 5, 2, 4.0).unwrap();
    let path = dir.join("program.json");
    std::fs::write(&path, pdflow::problem::to_json(&program)).unwrap();

    let status = bin()
        .args(["solve", "--experiment", "custom-file", "--problem-file"])
        .arg(&path)
        .args(["--mode", "metric", "--k-mult", "1", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.join("custom_file_file_metric_1.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn solve_outputs_are_deterministic() {
    let dir_a = scratch("det_a");
    let dir_b = scratch("det_b");
    for dir in [&dir_a, &dir_b] {
        let status = bin()
            .args([
                "solve", "--experiment", "random_qp", "--seed", "9", "--n", "8", "--m", "3",
                "--mode", "metric", "--k-mult", "2", "--full-state", "--out",
            ])
            .arg(dir)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    for name in ["random_qp_9_metric_2.csv", "random_qp_9_metric_2_summary.json"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    std::fs::remove_dir_all(&dir_a).ok();
    std::fs::remove_dir_all(&dir_b).ok();
}

#[test]
fn reproduce_fig2_writes_full_state_columns() {
    let dir = scratch("fig2");
    let status = bin().args(["reproduce", "fig2", "--out"]).arg(&dir).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("fig2/random_qp_1_metric_1.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("iter,t,residual,err_euclid,err_r,lyapunov,x_0"));
    assert!(header.ends_with("lambda_4"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reproduce_fig3_table_matches_oracle_to_tolerance() {
    let dir = scratch("fig3");
    let status = bin().args(["reproduce", "fig3", "--out"]).arg(&dir).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fig3/manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["max_abs_gap"].as_f64().unwrap() <= 1e-6);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reproduce_fig4_records_divergence_and_fit() {
    let dir = scratch("fig4");
    let status = bin().args(["reproduce", "fig4", "--out"]).arg(&dir).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fig4/manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["divergence_log"]
        .as_str()
        .unwrap()
        .contains("diverged"));
    assert!(manifest["fit_r_squared"].as_f64().unwrap() >= 0.9);
    assert!(manifest["final_kkt_total"].as_f64().unwrap() <= 1e-6);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_figure_is_a_config_error() {
    let out = bin().args(["reproduce", "fig9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn euclidean_certify_reports_the_semidefinite_spectrum() {
    let out = bin()
        .args([
            "certify", "--experiment", "random_qp", "--seed", "4", "--n", "7", "--m", "3",
            "--mode", "euclidean",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["zero_eigenvalues"], 3);
    assert_eq!(doc["monotone"], true);
    assert_eq!(doc["strongly_monotone"], false);
    assert!(doc["nu"].as_f64().unwrap().abs() <= 1e-9);
}

#[test]
fn fig1_manifest_rates_increase_with_k() {
    let dir = scratch("fig1rates");
    let status = bin().args(["reproduce", "fig1", "--out"]).arg(&dir).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fig1/manifest.json")).unwrap())
            .unwrap();
    let rates: Vec<f64> = manifest["curves"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["fitted_rate"].as_f64().unwrap())
        .collect();
    assert_eq!(rates.len(), 3);
    assert!(rates[0] < rates[1] && rates[1] < rates[2], "rates {rates:?}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn env_var_sets_the_default_output_dir() {
    let dir = scratch("envout");
    let status = bin()
        .env("PDFLOW_OUT", &dir)
        .args([
            "solve", "--experiment", "random_qp", "--seed", "2", "--n", "5", "--m", "2",
            "--mode", "euclidean", "--alpha", "stable", "--tol", "1e-8",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.join("random_qp_2_euclidean_0.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}
