//! End-to-end CLI checks: subcommands, file outputs and exit codes
//! (0 success, 1 partial failures, 2 config error, 3 total failure).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gpgm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpgm"))
}

fn write_config(dir: &Path, name: &str, value: serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

fn tiny_lv_config() -> serde_json::Value {
    serde_json::json!({
        "system": "lotka_volterra",
        "theta_true": [2.0, 1.0, 4.0, 1.0],
        "x0": [5.0, 3.0],
        "observations": {"count": 8, "t_min": 0.0, "t_max": 2.0},
        "noise": {"sd": 0.1},
        "kernel_family": "rbf",
        "shared_gp": true,
        "gamma": 0.3,
        "mcmc": {
            "n_mcmc": 50, "n_burnin": 10,
            "state_proposal_sd": 0.075, "param_proposal_sd": 0.09
        },
        "realizations": 2,
        "seed": 3,
        "theta_init": [1.0, 1.0, 1.0, 1.0]
    })
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn generate_writes_observation_and_truth_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.json", tiny_lv_config());
    let out = dir.path().join("data.csv");
    let output = gpgm()
        .args(["generate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_exit(&output, 0);

    let data = std::fs::read_to_string(&out).unwrap();
    assert!(data.starts_with("time,obs_0,obs_1\n"));
    assert_eq!(data.lines().count(), 1 + 8);
    let truth = std::fs::read_to_string(dir.path().join("data_truth.csv")).unwrap();
    assert!(truth.starts_with("time,state_0,state_1\n"));
}

#[test]
fn infer_writes_result_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.json", tiny_lv_config());
    let out = dir.path().join("result.json");
    let output = gpgm()
        .args(["infer", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_exit(&output, 0);

    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(record["realizations"][0]["status"], "ok");
    assert_eq!(record["aggregate"]["success_count"], 1);
    assert!(dir.path().join("result_rmse.csv").exists());
    assert!(dir.path().join("result_theta_hist.csv").exists());
    assert!(dir.path().join("result_trajectory_bands.csv").exists());
}

#[test]
fn benchmark_honors_seed_and_realization_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.json", tiny_lv_config());
    let out = dir.path().join("bench.json");
    let output = gpgm()
        .args(["benchmark", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "99", "--realizations", "1"])
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(record["config"]["seed"], 99);
    assert_eq!(record["realizations"].as_array().unwrap().len(), 1);
}

#[test]
fn select_gamma_reports_scores() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_lv_config();
    cfg["gamma"] = serde_json::Value::Null;
    cfg.as_object_mut().unwrap().remove("gamma");
    cfg["gamma_grid"] = serde_json::json!([0.1, 0.3]);
    let config = write_config(dir.path(), "cfg.json", cfg);
    let out = dir.path().join("gamma.json");
    let output = gpgm()
        .args(["select-gamma", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let selection: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(selection["scores"].as_array().unwrap().len(), 2);
    assert!(selection["chosen_gamma"].is_number());
}

#[test]
fn evaluate_accepts_explicit_theta() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.json", tiny_lv_config());
    let out = dir.path().join("eval.json");
    let output = gpgm()
        .args(["evaluate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--theta", "2.0,1.0,4.0,1.0"])
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let evals: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    // The true parameters reproduce the truth exactly.
    for rmse in evals[0]["rmse_per_state"].as_array().unwrap() {
        assert_eq!(rmse.as_f64().unwrap(), 0.0);
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown system.
    let mut bad = tiny_lv_config();
    bad["system"] = serde_json::json!("unknown_system");
    let config = write_config(dir.path(), "bad.json", bad);
    let out = dir.path().join("x.json");
    let output = gpgm()
        .args(["infer", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_exit(&output, 2);

    // Missing gamma for a command that needs one.
    let mut no_gamma = tiny_lv_config();
    no_gamma.as_object_mut().unwrap().remove("gamma");
    let config = write_config(dir.path(), "no_gamma.json", no_gamma);
    let output = gpgm()
        .args(["benchmark", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_exit(&output, 2);

    // No output path anywhere.
    let config = write_config(dir.path(), "cfg.json", tiny_lv_config());
    let output = gpgm().args(["infer", "--config"]).arg(&config).output().unwrap();
    assert_exit(&output, 2);

    // Evaluate needs exactly one of --theta / --result.
    let output = gpgm()
        .args(["evaluate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_exit(&output, 2);
}

#[test]
fn missing_config_file_exits_2() {
    let output = gpgm()
        .args(["infer", "--config", "/nonexistent/cfg.json", "--out", "/tmp/x.json"])
        .output()
        .unwrap();
    assert_exit(&output, 2);
}

#[test]
fn shipped_configs_parse_and_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        seen += 1;
        let text = std::fs::read_to_string(&path).unwrap();
        gpgm_config_check(&text, &path);
    }
    assert!(seen >= 8, "expected the shipped config set, found {seen}");
}

fn gpgm_config_check(text: &str, path: &Path) {
    use gpgm::harness::ExperimentConfig;
    if let Err(e) = ExperimentConfig::from_json(text) {
        panic!("shipped config {} is invalid: {e}", path.display());
    }
}
