use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn rslmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rslmc"))
        .args(args)
        .env_remove("RSL_DATA_DIR")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    repo().join("configs").join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sample_writes_two_deterministic_curves() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for out in &runs {
        let o = rslmc(&["sample", "--config", &config("linreg_rslmc_small_vs_large.json"), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = runs[0].join("linreg_rslmc_small_vs_large");
    let b = runs[1].join("linreg_rslmc_small_vs_large");
    let curves = ["rs_lmc_narrow_seed0.csv", "rs_lmc_wide_seed0.csv", "summary.csv"];
    for f in curves {
        let bytes = fs::read(a.join(f)).unwrap();
        assert_eq!(bytes, fs::read(b.join(f)).unwrap(), "{f} differs between runs");
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("iteration,"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 2001);
    }
}

#[test]
fn first_order_kernel_guard_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = r#"{
        "id": "bad",
        "target": {"kind": "quadratic", "precision": [[1.0]]},
        "runs": [{"label": "RS", "algorithm": "RS-LMC",
                  "regime": {"values": "wide_multipliers", "generator": "fast_5"}}],
        "stepsize": 0.05, "iterations": 10, "seeds": [0]
    }"#;
    fs::write(&path, text).unwrap();
    let o = rslmc(&["sample", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("runs[0].regime.generator") && err.contains("q_i·η ≤ 1"), "{err}");
}

#[test]
fn divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diverge.json");
    let text = r#"{
        "id": "diverge",
        "target": {"kind": "quadratic", "precision": [[1.0]]},
        "runs": [{"label": "LMC", "algorithm": "LMC"}],
        "stepsize": 3.0, "iterations": 200, "seeds": [0],
        "initial_position": [1.0]
    }"#;
    fs::write(&path, text).unwrap();
    let o = rslmc(&["sample", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("diverged at"));
}

#[test]
fn theory_table_ladder() {
    let o = rslmc(&["theory", "--config", &config("theory_ladder.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut k: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        k.entry(cols[0].to_string()).or_default().push(cols[3].parse().unwrap());
    }
    for (alg, lo, hi) in [("RS-LMC", 3.0, 6.0), ("RS-KLMC", 1.7, 2.5), ("FRS-KLMC", 1.2, 1.8)] {
        let ks = &k[alg];
        assert_eq!(ks.len(), 3);
        for w in ks.windows(2) {
            let ratio = w[1] / w[0];
            assert!((lo..=hi).contains(&ratio), "{alg}: {ratio}");
        }
    }
}

#[test]
fn theory_missing_m_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(config("theory_ladder.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("m");
    fs::write(&path, v.to_string()).unwrap();
    let o = rslmc(&["theory", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`m`"), "{}", stderr(&o));
}

#[test]
fn ctmc_check_fast_generator() {
    let o = rslmc(&["ctmc-check", "--config", &config("ctmc_fast_5.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for p in report["stationary"].as_array().unwrap() {
        assert!((p.as_f64().unwrap() - 0.2).abs() < 1e-12);
    }
    assert!(report["total_variation"].as_f64().unwrap() < 1e-2);
    assert!((report["spectral_gap"].as_f64().unwrap() - 40.0).abs() < 1e-9);
}

#[test]
fn ctmc_check_reports_gap_of_slow_generator() {
    let o = rslmc(&["ctmc-check", "--config", &config("ctmc_slow_a.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((report["spectral_gap"].as_f64().unwrap() - 0.6).abs() < 1e-9);
}

#[test]
fn ctmc_check_rejects_invalid_generator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    fs::write(&path, r#"{"generator": [[-1.0, 0.5], [0.5, -0.5]]}"#).unwrap();
    let o = rslmc(&["ctmc-check", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 0 sums to"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_lists_bundled() {
    let o = rslmc(&["experiment", "--name", "fig9"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("fig1_rs_lmc") && err.contains("fig_logistic_magic"), "{err}");
}

#[test]
fn missing_dataset_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = rslmc(&["experiment", "--name", "fig_logistic_magic", "--data-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("magic04.data"));
}

#[test]
fn iris_experiment_from_env_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rslmc"))
        .args(["experiment", "--name", "fig_logistic_iris", "--seeds", "1", "--out", dir.path().to_str().unwrap()])
        .env("RSL_DATA_DIR", repo().join("data"))
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("fig_logistic_iris/summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), "iteration,SGLD,RS-SGLD,SGHMC,RS-SGHMC,FRS-SGHMC");
}

#[test]
fn bundled_config_files_match_builtin_definitions() {
    for name in [
        "fig1_rs_lmc",
        "fig2_rs_klmc",
        "fig3_frs_klmc",
        "fig_logistic_synthetic",
        "fig_logistic_iris",
        "fig_logistic_magic",
    ] {
        let o = rslmc(&["experiment", "--name", name, "--dump-config"]);
        assert!(o.status.success());
        let file = fs::read_to_string(config(&format!("{name}.json"))).unwrap();
        assert_eq!(stdout(&o), file, "configs/{name}.json is stale");
    }
}
