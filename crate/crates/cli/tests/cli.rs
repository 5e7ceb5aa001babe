use std::path::Path;
use std::process::{Command, Output};

use relax_shock_cli::{max_difference, read_profile_csv, RunConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relax-shock"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("error object on stderr")
}

fn solve_into(dir: &Path, eps: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let prof = dir.join("profile.csv");
    let diag = dir.join("diag.json");
    let o = run(&["solve", "--epsilon", eps, "--out-profile", prof.to_str().unwrap(), "--out-diag", diag.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    (prof, diag)
}

#[test]
fn check_reports_kawashima_margin() {
    let o = run(&["check"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["schema"], 1);
    let theta = doc["theta_kawashima"].as_f64().unwrap();
    assert!((theta - 0.5).abs() < 0.01, "{theta}");
    assert_eq!(doc["report"]["all_pass"], true);
}

#[test]
fn check_broadwell_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": {"kind": "broadwell"}}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_writes_profile_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let (prof, diag) = solve_into(dir.path(), "0.1");
    let text = std::fs::read_to_string(&prof).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,u_1,v_1"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    // 17 significant digits in scientific notation
    assert!(first.iter().all(|f| f.split('e').next().unwrap().trim_start_matches('-').len() == 18), "{first:?}");
    let d = json_file(&diag);
    assert_eq!(d["schema"], 1);
    assert!(d["iterations"].as_u64().unwrap() <= 8);
    for key in ["eta", "phase_residual", "C_emp"] {
        assert!(d["linear"][key].is_number(), "{key}");
    }
    for key in ["mu_minus", "mu_plus", "alpha"] {
        assert!(d["linear"]["fluid"][key].is_number(), "{key}");
    }
    assert!(d["linear"]["fluid"]["mu_minus"].as_f64().unwrap() > 0.0);
    assert!(d["linear"]["fluid"]["mu_plus"].as_f64().unwrap() < 0.0);
}

#[test]
fn verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (prof, diag) = solve_into(dir.path(), "0.1");
    let out = dir.path().join("verify.json");
    let o = run(&["verify", "--in-profile", prof.to_str().unwrap(), "--in-diag", diag.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_file(&out);
    assert_eq!(v["matches"], true);
    assert!(v["max_difference"].as_f64().unwrap() <= 1e-9);
    let d = json_file(&diag);
    assert!(max_difference(&d["bounds"], &v["bounds"]) <= 1e-9);
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let (prof, diag) = solve_into(dir.path(), "0.1");
    let mut d = json_file(&diag);
    d["residual"] = Value::from(d["residual"].as_f64().unwrap() * 2.0);
    std::fs::write(&diag, d.to_string()).unwrap();
    let o = run(&["verify", "--in-profile", prof.to_str().unwrap(), "--in-diag", diag.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (pa, da) = solve_into(a.path(), "0.05");
    let (pb, db) = solve_into(b.path(), "0.05");
    assert_eq!(std::fs::read(da).unwrap(), std::fs::read(db).unwrap());
    assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
}

#[test]
fn out_of_regime_amplitude_is_a_computational_failure() {
    let o = run(&["solve", "--epsilon", "0.9"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["schema"], 1);
    assert!(e["error"].is_string() && e["message"].is_string());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"epsilon": 0.1, "grdi": {"h": 0.1}}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "ConfigInvalid");
}

#[test]
fn invalid_flag_value_is_a_config_error() {
    let o = run(&["solve", "--epsilon", "-0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["solve", "--nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ns_profile_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("ns.csv");
    let diag = dir.path().join("ns.json");
    let o = run(&["ns-profile", "--epsilon", "0.1", "--out-profile", prof.to_str().unwrap(), "--out-diag", diag.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let d = json_file(&diag);
    assert_eq!(d["lax_count"], 2);
    assert!((d["theta_fit"].as_f64().unwrap() - 0.5).abs() < 0.075);
    assert!(d["sup_Rv"].as_f64().unwrap() > 0.0);
    let (f, n) = read_profile_csv(&prof, 0.1).unwrap();
    assert_eq!((n, f.dim), (1, 2));
    // u_NS runs from u- = eps/2 to u+ = -eps/2
    assert!((f.at(0)[0] - 0.05).abs() < 1e-6 && (f.at(f.len() - 1)[0] + 0.05).abs() < 1e-6);
}

#[test]
fn grid_flags_are_honored() {
    let dir = tempfile::tempdir().unwrap();
    let diag = dir.path().join("d.json");
    let o = run(&["solve", "--epsilon", "0.1", "--grid-L", "300", "--grid-h", "0.2", "--out-diag", diag.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d = json_file(&diag);
    assert_eq!(d["grid"]["L"], 300.0);
    assert_eq!(d["grid"]["h"], 0.2);
}

#[test]
fn spectrum_of_solved_profile() {
    let dir = tempfile::tempdir().unwrap();
    let (prof, _) = solve_into(dir.path(), "0.1");
    let out = dir.path().join("spec.json");
    let o = run(&["spectrum", "--in-profile", prof.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json_file(&out);
    let eig = s["eigenvalues"].as_array().unwrap();
    let re: Vec<f64> = eig.iter().map(|z| z[0].as_f64().unwrap()).collect();
    assert!(re.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(s["margins"]["count_above_threshold"], 1);
    assert!(s["translation"]["correlation"].as_f64().unwrap() >= 0.99);
    assert!((s["epsilon"].as_f64().unwrap() - 0.1).abs() < 1e-6);
}

#[test]
fn sweep_passes_scaling_gates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = run(&["sweep", "--epsilons", "0.05,0.1,0.2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = json_file(&out);
    assert!(s["table"]["slopes"]["rv"].as_f64().unwrap() >= 2.7);
}

#[test]
fn malformed_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "t,u_1,v_1\n0,0,0\n").unwrap();
    let o = run(&["spectrum", "--in-profile", p.to_str().unwrap(), "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_defaults_and_models() {
    let c = RunConfig::from_json("{}").unwrap();
    assert_eq!(c, RunConfig::default());
    let c = RunConfig::from_json(r#"{"model": {"kind": "jin_xin", "a": 2.0}, "grid": {"L": 100, "h": 0.05}}"#).unwrap();
    assert_eq!(c.grid.l, Some(100.0));
    assert!(RunConfig::from_json(r#"{"model": {"kind": "broadwell", "a": 1}}"#).is_err());
    assert!(RunConfig::from_json(r#"{"solver": {"tol": 0}}"#).is_err());
}
