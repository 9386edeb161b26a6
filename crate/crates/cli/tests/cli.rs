use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qfcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfcsim"))
        .args(args)
        .env_remove("QFCSIM_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

/// Drops the manifest lines that legitimately differ between runs.
fn stable_lines(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# timestamp") && !l.starts_with("# command"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn budget_reproduces_external_efficiency() {
    let v = json(&qfcsim(&["budget", "--twg", "0.49", "--eta-int", "0.93", "--collect", "0.80", "--filter", "0.79"]));
    let eta = v["summary"]["eta_ext"].as_f64().unwrap();
    assert!((eta - 0.288).abs() < 1e-3, "{eta}");
    let m = &v["manifest"];
    for key in ["tool_version", "command", "config_digest", "seed", "timestamp"] {
        assert!(!m[key].is_null(), "manifest lacks {key}");
    }
    assert_eq!(m["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn ideal_tuning_curve_peaks_at_one() {
    let v = json(&qfcsim(&["tuning-curve", "--length-mm", "20", "--period-um", "3.07", "--defects", "none"]));
    let peak = v["summary"]["peak_relative_eta"].as_f64().unwrap();
    assert!((peak - 1.0).abs() < 1e-6, "{peak}");
}

#[test]
fn midpoint_full_period_defect_cancels_at_nominal_q() {
    let dir = tempfile::tempdir().unwrap();
    let map = write(dir.path(), "map.csv", "position_um,width_um\n10000,3.07\n");
    let v = json(&qfcsim(&["tuning-curve", "--defects", &map, "--mode", "at-nominal-q"]));
    assert!(v["summary"]["relative_efficiency"].as_f64().unwrap() < 1e-4);
}

#[test]
fn tuning_curve_is_deterministic_apart_from_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let map = write(dir.path(), "map.csv", "# two defects\nposition_um,width_um\n4000,7\n15000,12\n");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = qfcsim(&["tuning-curve", "--defects", &map, "--points", "201", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let table = fs::read_to_string(out.join("tuning_curve.csv")).unwrap();
        (json(&o), table)
    };
    let (a, ta) = run("a");
    let (b, tb) = run("b");
    assert_eq!(a["summary"], b["summary"]);
    assert_eq!(a["manifest"]["config_digest"], b["manifest"]["config_digest"]);
    assert_eq!(stable_lines(&ta), stable_lines(&tb));
    assert!(ta.starts_with("# tool_version"));
    assert_eq!(ta.lines().filter(|l| !l.starts_with('#')).count(), 202);
}

#[test]
fn mc_zero_defects_always_succeeds() {
    let v = json(&qfcsim(&["mc", "--defect-counts", "0", "--trials", "1000", "--seed", "7"]));
    let r = &v["summary"]["results"][0];
    assert_eq!(r["p_hat"].as_f64().unwrap(), 1.0);
    assert_eq!(v["manifest"]["seed"].as_u64().unwrap(), 7);
}

#[test]
fn mc_tables_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(threads);
        let o = qfcsim(&[
            "mc", "--defect-counts", "1,2", "--trials", "500", "--seed", "3", "--threads", threads, "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        stable_lines(&fs::read_to_string(out.join("mc.csv")).unwrap())
    };
    assert_eq!(run("1"), run("8"));
}

#[test]
fn mc_refuses_too_few_trials() {
    let o = qfcsim(&["mc", "--trials", "99"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 100"));
}

#[test]
fn seed_precedence() {
    let env_seed = Command::new(env!("CARGO_BIN_EXE_qfcsim"))
        .args(["budget", "--twg", "1", "--eta-int", "1", "--collect", "1", "--filter", "1"])
        .env("QFCSIM_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(json(&env_seed)["manifest"]["seed"], 9);
    let flag_seed = Command::new(env!("CARGO_BIN_EXE_qfcsim"))
        .args(["budget", "--twg", "1", "--eta-int", "1", "--collect", "1", "--filter", "1", "--seed", "5"])
        .env("QFCSIM_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(json(&flag_seed)["manifest"]["seed"], 5);
    let default = qfcsim(&["budget", "--twg", "1", "--eta-int", "1", "--collect", "1", "--filter", "1"]);
    assert_eq!(json(&default)["manifest"]["seed"], 42);
}

#[test]
fn malformed_rows_are_listed_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let map = write(dir.path(), "bad.csv", "position_um,width_um\n100,3\nabc,4\n# note\n200,\n300,5,6\n");
    let o = qfcsim(&["tuning-curve", "--defects", &map]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("3 problem(s)"), "{err}");
    assert!(err.contains("line 3, column `position_um`"), "{err}");
    assert!(err.contains("line 5, column `width_um`"), "{err}");
    assert!(err.contains("line 6: expected 2 fields"), "{err}");
}

#[test]
fn wrong_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "cb.csv", "L,transmission\n1,0.5\n");
    let o = qfcsim(&["loss", "cutback", &data]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("expected `length_cm`, found `L`"));
}

#[test]
fn cutback_recovers_noiseless_loss() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("length_cm,transmission\n");
    for l in [0.5, 1.0, 1.5, 2.0, 2.5] {
        body.push_str(&format!("{l},{}\n", 0.7 * (-0.22f64 * l).exp()));
    }
    let data = write(dir.path(), "cb.csv", &body);
    let v = json(&qfcsim(&["loss", "cutback", &data]));
    let alpha = v["summary"]["alpha_per_cm"].as_f64().unwrap();
    assert!((alpha - 0.22).abs() < 1e-12, "{alpha}");
}

#[test]
fn fp_contrast_worked_example() {
    let v = json(&qfcsim(&["loss", "fp", "--contrast", "0.65952", "--index", "2.14", "--length-mm", "20"]));
    let alpha = v["summary"]["alpha_per_cm"].as_f64().unwrap();
    assert!((alpha - 0.12).abs() < 1e-4, "{alpha}");
}

#[test]
fn unknown_fit_model_lists_the_choices() {
    let o = qfcsim(&["fit", "--model", "cubic", "data.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for m in ["sin2", "lowconv", "noise-lossless", "noise-lossy"] {
        assert!(err.contains(m), "{err}");
    }
}

#[test]
fn lowconv_fit_recovers_generating_efficiency() {
    let dir = tempfile::tempdir().unwrap();
    let losses = qfcsim::LossSet::new(0.22, 0.20, 0.12).unwrap();
    let g = qfcsim::cme::lossy_gain_factor(&losses, 2.0);
    let lossy = |p_w: f64| 7.03 * g * p_w;
    let mut body = String::from("pump_mw,eta_int\n");
    for p in [1.0, 2.0, 3.0, 4.0, 5.0, 40.0] {
        body.push_str(&format!("{p},{}\n", lossy(p * 1e-3)));
    }
    let data = write(dir.path(), "eff.csv", &body);
    let v = json(&qfcsim(&["fit", "--model", "lowconv", &data]));
    let pct = v["summary"]["eta_nor_pct"].as_f64().unwrap();
    assert!((pct - 703.0).abs() < 1e-6, "{pct}");
}

#[test]
fn noise_and_cme_sweeps_run() {
    let v = json(&qfcsim(&["cme", "--pump-start-mw", "10", "--pump-stop-mw", "60", "--pump-step-mw", "10"]));
    assert!(v["summary"]["peak_eta_int"].as_f64().unwrap() > 0.0);
    let v = json(&qfcsim(&[
        "noise", "--a", "1e6", "--pump-start-mw", "10", "--pump-stop-mw", "60", "--pump-step-mw", "10",
    ]));
    assert!(v["summary"]["argmax_enr_mw"].as_f64().is_some());
}

#[test]
fn detune_moves_off_the_noise_peak() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("temperature_c,counts_hz\n");
    for i in 0..=80 {
        let t = 30.0 + 0.1 * i as f64;
        body.push_str(&format!("{t},{}\n", 100.0 + 900.0 * (-(t - 33.0f64).powi(2) / 0.1).exp()));
    }
    let profile = write(dir.path(), "profile.csv", &body);
    let v = json(&qfcsim(&[
        "detune", "--profile", &profile, "--lambda-min-nm", "527.30", "--lambda-max-nm", "527.44",
    ]));
    let s = &v["summary"];
    assert!(s["reduction_factor"].as_f64().unwrap() > 5.0);
    assert!((s["lambda_opt_nm"].as_f64().unwrap() - 527.37).abs() > 0.01);
}
