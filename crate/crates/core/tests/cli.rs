use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_timerev"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn help_lists_checks_and_exit_codes() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for c in ["ibp", "continuity", "reversal", "detailed-balance", "carre", "nelson", "dissipation"] {
        assert!(text.contains(c), "{c} missing from help");
    }
    assert!(text.contains("Exit codes"));
}

#[test]
fn cycle_run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run"], &example("cycle_reversal.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["jumps.csv", "marginals.csv", "reversed_intensities.csv", "entropy.json", "verify.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let verify: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(verify["all_pass"], true);
    let ibp = verify["checks"].as_array().unwrap().iter().find(|c| c["check"] == "ibp").unwrap();
    assert!(ibp["details"]["max_abs_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn verify_subcommand_selects_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], &example("cycle_reversal.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = bin()
        .args(["verify", "--config"])
        .arg(example("cycle_reversal.json"))
        .arg("--out")
        .arg(dir.path())
        .arg("ibp")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let checks = doc["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["check"], "ibp");
    assert_eq!(checks[0]["details"]["n_pairs"], 180);
}

#[test]
fn failing_check_exits_one() {
    // the biased cycle is not reversible
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--config"])
        .arg(example("cycle_reversal.json"))
        .arg("--out")
        .arg(dir.path())
        .arg("detailed-balance")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["all_pass"], false);
}

#[test]
fn invalid_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"type": "ou", "dim": 1}, "grid": {"T": 1.0, "n_steps": 0}, "n_paths": 10, "seed": 1, "density": "exact", "output_dir": "x"}"#,
    );
    let out = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let cfg = write_config(dir.path(), r#"{"model": {"type": "ou"}, "bogus": 1}"#);
    assert_eq!(run(&["run"], &cfg, &dir.path().join("out")).status.code(), Some(2));
    assert_eq!(run(&["run"], &dir.path().join("missing.json"), dir.path()).status.code(), Some(2));
    assert_eq!(bin().args(["verify", "--config", "x.json", "no-such-check"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn inapplicable_check_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--config"])
        .arg(example("cycle_reversal.json"))
        .arg("--out")
        .arg(dir.path())
        .arg("nelson")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rw_reverse_prints_the_intensity_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rw", "reverse"], &example("cycle_reversal.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("from,to,t,j_fwd,j_bwd"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    // 8 directed edges at 5 quarter times; uniform marginals swap the rates
    assert_eq!(rows.len(), 40);
    for r in &rows {
        let cw = (r[1] as usize) == (r[0] as usize + 1) % 4;
        assert_eq!(r[3], if cw { 2.0 } else { 1.0 });
        assert!((r[4] - if cw { 1.0 } else { 2.0 }).abs() < 1e-12);
    }

    let out = run(&["rw", "reverse", "--format", "json"], &example("cycle_reversal.json"), dir.path());
    let doc = json(&out);
    assert_eq!(doc.as_array().unwrap().len(), 40);
}

#[test]
fn rw_entropy_of_the_biased_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rw", "entropy"], &example("cycle_reversal.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    // uniform start on 4 states, each state leaves at rates 2 and 1 against the unit counting walk
    let h = |x: f64| x * x.ln() - x + 1.0;
    let expected = -(4.0f64).ln() + h(2.0) + h(1.0);
    let got = doc["relative_entropy"].as_f64().unwrap();
    assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
}

#[test]
fn entropy_of_the_shifted_ou_reversal() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["entropy"], &example("shifted_ou.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let v = |k: &str| doc[k]["value"].as_f64().unwrap();
    assert!((v("action_current") - (1.0 - (-2.0f64).exp()) / 4.0).abs() < 1e-5);
    assert!((v("free_energy_change") + (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-5);
    assert!(v("action_fwd").abs() < 1e-12);
    assert!(dir.path().join("fisher.csv").exists());
}

#[test]
fn reverse_table_for_the_diffusion() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reverse"], &example("shifted_ou.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,x_1,b_rev_1,v_fwd_1,v_bwd_1,v_cu_1,v_os_1,supported"));
    for line in text.lines().skip(1) {
        let r: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (t, x) = (r[0], r[1]);
        assert!((r[2] - (-x + 2.0 * (-(1.0 - t)).exp())).abs() < 1e-9, "{line}");
    }
}

#[test]
fn simulate_writes_a_readable_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--seed", "3"], &example("shifted_ou.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let e = timerev::ensemble::PathEnsemble::read_binary(fs::File::open(dir.path().join("ensemble.bin")).unwrap()).unwrap();
    assert_eq!((e.n_paths(), e.grid().n_steps(), e.seed()), (4000, 400, 3));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = example("shifted_ou.json");
    assert_eq!(run(&["run"], &cfg, a.path()).status.code(), Some(0));
    let out = bin()
        .env("RAYON_NUM_THREADS", "1")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?} differs");
    }
}
