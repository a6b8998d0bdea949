use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrwlab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_two_cycle_from_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("validate", &configs().join("validate_two_cycle.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["tool"], "mrwlab");
    assert_eq!(r["status"], "pass");
    assert_eq!(r["exit_code"], 0);
    let csv = std::fs::read_to_string(out.join("stationary.csv")).unwrap();
    assert!(csv.lines().count() == 3, "{csv}");
    assert!(out.join("summary.txt").exists());
}

#[test]
fn factorize_simple_walk() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("factorize", &configs().join("factorize_simple_rw.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("kernels.csv").exists());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("factorize: Pass"), "{text}");
}

#[test]
fn zero_drift_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for cmd in ["factorize", "verify"] {
        let cfg = write_config(
            dir.path(),
            "r2.json",
            r#"{"model": {"zoo": {"name": "remark2"}}, "seed": 1}"#,
        );
        let o = run(cmd, &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(3), "{cmd}");
        assert_eq!(report(&out)["status"], "non_convergence");
    }
    let cfg = write_config(
        dir.path(),
        "r2_forced.json",
        r#"{"model": {"zoo": {"name": "remark2"}}, "allow_nonpositive_drift": true}"#,
    );
    assert_eq!(run("factorize", &cfg, &out, &[]).status.code(), Some(3));
}

#[test]
fn injected_perturbation_is_an_identity_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("verify", &configs().join("verify_perturbed.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    let failed: Vec<&str> = r["results"]["verification"]["identities"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["identity_id"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["wiener_hopf", "mass_factorization"]);
    assert!(out.join("identities.csv").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let model = configs().join("models/bad_row_sum.json");
    let bad_rows = write_config(
        dir.path(),
        "rows.json",
        &format!(r#"{{"model": {{"path": {:?}}}}}"#, model.display().to_string()),
    );
    let o = run("validate", &bad_rows, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(report(&out)["error"].as_str().unwrap().contains("row"));

    let unknown = write_config(
        dir.path(),
        "unknown.json",
        r#"{"model": {"zoo": {"name": "two_cycle"}}, "sede": 1}"#,
    );
    assert_eq!(run("validate", &unknown, &out, &[]).status.code(), Some(2));

    let no_seed = write_config(
        dir.path(),
        "noseed.json",
        r#"{"model": {"zoo": {"name": "two_cycle"}}}"#,
    );
    assert_eq!(run("simulate", &no_seed, &out, &[]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(run("validate", &missing, &out, &[]).status.code(), Some(2));

    let o = bin().arg("explode").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "flower.json",
        r#"{"seed": 1, "counterexample": {"path_steps": 500, "n": 200, "b": 5, "replicates": 200}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("counterexample", &cfg, &a, &["--seed", "2"]).status.code(), Some(0));
    assert_eq!(run("counterexample", &cfg, &b, &[]).status.code(), Some(0));
    assert_eq!(report(&a)["seed"], 2);
    assert_eq!(report(&b)["seed"], 1);
}

#[test]
fn out_directory_from_config_is_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.json",
        r#"{"model": {"zoo": {"name": "two_cycle"}}, "out": "nested/run"}"#,
    );
    let o = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("nested/run/report.json").exists());
}

#[test]
fn simulate_writes_ladder_and_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{"model": {"zoo": {"name": "two_cycle"}}, "seed": 3,
            "simulate": {"initial_state": 1, "n_steps": 8, "n_ladder": 20, "replicates": 4, "sigma0_replicates": 100}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("simulate", &cfg, &out, &[]).status.code(), Some(0));
    let ladder = std::fs::read_to_string(out.join("ladder.csv")).unwrap();
    assert_eq!(ladder.lines().next().unwrap(), "index,epoch,state,height");
    // From b: S = 0, −1, 1, 0, 2, 1, 3, 2, 4.
    let epochs: Vec<&str> = ladder.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(epochs, ["0", "2", "4", "6", "8"]);
    let est = std::fs::read_to_string(out.join("estimates.csv")).unwrap();
    assert!(est.contains("ladder_occupation"));
    assert!(est.contains("sigma0_probability"));
}

#[test]
fn shipped_example_configs_parse() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = mrwlab::cli::RunConfig::load(&path).unwrap();
            if cfg.model.is_some() {
                cfg.load_model().unwrap();
            }
        }
    }
}
