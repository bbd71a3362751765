use std::path::{Path, PathBuf};
use std::process::Command;

use bloch_cli::config::ExperimentConfig;
use bloch_cli::error::exit;
use bloch_cli::output::{trace_header, RunSummary, Status};
use bloch_cli::run::{sweep_run_dir, SUMMARY_FILE, SUMMARY_JSON, TRACE_FILE};
use bloch_cli::{execute, run_experiment, sweep, OUTPUT_DIR_ENV};
use bloch_core::models::lz_asymptotic_amplitude;
use bloch_core::Norm;

const LZ_SMALL: &str = r#"
[model]
name = "landau-zener"
gamma = 2.0

[time]
t0 = -10.0
t_final = 10.0
checkpoints = 21
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bloch"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(text: &str, dir: &Path, extra: &[&str]) -> ExperimentConfig {
    let mut o: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    o.push(format!("output.dir={:?}", dir.display().to_string()));
    ExperimentConfig::parse(text, &o).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_writes_trace_and_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_experiment(&config(LZ_SMALL, tmp.path(), &[])).unwrap();
    assert_eq!(run.summary().status, Status::Ok);

    let (header, rows) = read_csv(&tmp.path().join(TRACE_FILE));
    assert_eq!(header, trace_header(&[Norm::Spectral, Norm::Frobenius], 2));
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), -10.0);
    assert_eq!(rows[20][0].parse::<f64>().unwrap(), 10.0);

    let (header, rows) = read_csv(&tmp.path().join(SUMMARY_FILE));
    assert_eq!(header, RunSummary::HEADER);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "landau-zener");
    assert_eq!(rows[0][9], "ok");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join(SUMMARY_JSON)).unwrap())
            .unwrap();
    assert_eq!(json["summary"]["status"], "ok");
    assert!(json["config"]["model"]["gamma"].as_f64() == Some(2.0));
}

#[test]
fn identical_configs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&config(LZ_SMALL, a.path(), &[])).unwrap();
    run_experiment(&config(LZ_SMALL, b.path(), &[])).unwrap();
    for f in [TRACE_FILE, SUMMARY_FILE] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn single_gamma_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{LZ_SMALL}\n[sweep]\ngammas = [2.0]\nics = [\"identity\"]\n");
    let result = sweep(&config(&text, &tmp.path().join("sweep"), &[])).unwrap();
    assert_eq!(result.points.len(), 1);
    assert!(result.fits.iter().all(|f| f.slope.is_none()));

    let single = tmp.path().join("single");
    run_experiment(&config(LZ_SMALL, &single, &[])).unwrap();
    let run_dir = sweep_run_dir(&tmp.path().join("sweep"), 2.0, bloch_cli::config::IcChoice::Identity);
    for f in [TRACE_FILE, SUMMARY_FILE] {
        let x = std::fs::read(run_dir.join(f)).unwrap();
        let y = std::fs::read(single.join(f)).unwrap();
        assert!(x == y, "{f} differs between sweep and run");
    }
}

#[test]
fn uncoupled_three_level_does_not_leak() {
    let text = r#"
[model]
name = "three-level"
gamma = 10.0
a = 0.0

[time]
t_final = 20.0
checkpoints = 41
"#;
    let tmp = tempfile::tempdir().unwrap();
    let (row, _) = execute(&config(text, tmp.path(), &[])).unwrap();
    let s = row.summary;
    assert_eq!(s.status, Status::Ok);
    assert!(s.max_leakage_spectral.unwrap() <= 1e-10);
    assert!(s.delta_spectral.unwrap() <= 1e-10);
}

#[test]
fn landau_zener_distance_matches_asymptotics() {
    let text = r#"
[model]
name = "landau-zener"
gamma = 2.0

[time]
t0 = -50.0
t_final = 50.0
checkpoints = 101

[solver]
route = "closed_form"
frame_checks = false
"#;
    let tmp = tempfile::tempdir().unwrap();
    let (row, _) = execute(&config(text, tmp.path(), &[])).unwrap();
    let (_, tan_phi) = lz_asymptotic_amplitude(2.0);
    let d = row.summary.final_spectral.unwrap();
    assert!((d - tan_phi).abs() <= 1e-3 * tan_phi, "{d} vs {tan_phi}");
    assert!((d - 0.0433).abs() < 1e-4);
}

#[test]
fn tabulated_model_runs_from_example_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(
        &configs_dir().join("custom.toml"),
        &[format!("output.dir={:?}", tmp.path().display().to_string())],
    )
    .unwrap();
    let run = run_experiment(&cfg).unwrap();
    let s = run.summary();
    assert_eq!(s.status, Status::Ok);
    assert_eq!(s.model, "custom");
    assert_eq!(run.row.interpolation, "natural cubic spline");
    assert!(s.bounds_hold == Some(true));
}

#[test]
fn custom_initial_condition_from_example_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(
        &configs_dir().join("three-level-custom-ic.toml"),
        &[
            format!("output.dir={:?}", tmp.path().display().to_string()),
            "time.t_final=10.0".into(),
            "time.checkpoints=21".into(),
        ],
    )
    .unwrap();
    let run = run_experiment(&cfg).unwrap();
    assert_eq!(run.summary().status, Status::Ok);
    assert_eq!(run.summary().ic, "custom");
    // U(t0) = U0, whose distance from 1 is that of its off-block part.
    let (_, rows) = read_csv(&tmp.path().join(TRACE_FILE));
    let d0: f64 = rows[0][2].parse().unwrap();
    assert!((d0 - (0.05f64.powi(2) + 0.02f64.powi(2)).sqrt()).abs() < 1e-12);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().arg("models").output().unwrap();
    assert_eq!(out.status.code(), Some(exit::OK));
    assert!(String::from_utf8_lossy(&out.stdout).contains("landau-zener"));

    let good = write_config(tmp.path(), LZ_SMALL);
    let out = bin().arg("validate").arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::OK));
    assert!(String::from_utf8_lossy(&out.stdout).contains("checkpoints = 21"));

    let out = bin()
        .arg("validate")
        .arg(&good)
        .args(["--set", "time.bogus=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));

    let out = bin()
        .arg("validate")
        .arg(&good)
        .arg("--gamma=-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));

    let out = bin().arg("run").arg(tmp.path().join("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::IO));

    let out = bin().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(exit::OK));
}

#[test]
fn output_directory_from_environment_and_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), LZ_SMALL);
    let env_dir = tmp.path().join("from-env");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .env(OUTPUT_DIR_ENV, &env_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join(TRACE_FILE).exists());

    let flag_dir = tmp.path().join("from-flag");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&flag_dir)
        .env(OUTPUT_DIR_ENV, tmp.path().join("ignored"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::OK));
    assert!(flag_dir.join(SUMMARY_FILE).exists());
    assert!(!tmp.path().join("ignored").exists());
}
