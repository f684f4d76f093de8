use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn friday(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_friday"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SHORT: &str = "name = \"t\"\nduration = 1.0\nseeds = [0, 1]\n";

#[test]
fn run_writes_trials_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = dir.path().join("out");
    let o = friday(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines[0],
        "run,seed,mean_tracking_error,mean_estimation_error,final_offset,diverged"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("t,0,"));
    for seed in 0..2 {
        let csv = fs::read_to_string(out.join(format!("t_seed{seed}.csv"))).unwrap();
        assert!(csv
            .lines()
            .any(|l| l == "t,p,pdot,pr,prdot,u,r_true,r_hat,loss,flags"));
        // 1 s at 20 Hz
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 21);
    }
    assert!(out.join("t_summary.csv").exists());
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "name = \"s\"\nduration = 0.5\ncontroller = \"lqr\"\n",
    );
    let out = dir.path().join("out");
    let o = friday(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "3",
        "--parallel",
        "2",
    ]);
    assert!(o.status.success());
    for seed in 0..3 {
        assert!(out.join(format!("s_seed{seed}.csv")).exists());
    }
    assert!(!out.join("s_seed3.csv").exists());
}

#[test]
fn sweep_covers_every_combination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "name = \"w\"\nduration = 0.5\nseeds = [0]\n");
    let out = dir.path().join("out");
    let o = friday(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--truths",
        "multi,enviro_harsh",
        "--controllers",
        "lqr,adaptive",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for t in ["multi", "enviro_harsh"] {
        for c in ["lqr", "adaptive"] {
            assert!(out.join(format!("w_{t}_{c}_seed0.csv")).exists());
        }
    }
    let summary = fs::read_to_string(out.join("w_sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn bad_config_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration = -1.0\n");
    let o = friday(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duration"));

    let cfg = write_config(dir.path(), "name = \"x\"\nduration = 0.1\n");
    let o = friday(&["sweep", "--config", &cfg, "--truths", "moon"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_exits_3() {
    let o = friday(&["run", "--config", "/nonexistent/friday.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn compare_needs_the_enviro_sine_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[truth]\nkind = \"multi\"\n");
    let o = friday(&["compare-estimators", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_prints_one_line_per_item() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "name = \"c\"\nduration = 2.0\nseeds = [0]\n\n[network]\nzeta = 0.9\n\n[check]\naudit_pairs = 500\naudit_every = 10\ncontraction_pairs = 500\n",
    );
    let o = friday(&["check", "--config", &cfg]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let items: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
        .collect();
    for name in [
        "lipschitz_bound",
        "lipschitz_audit",
        "contraction",
        "fixed_point",
        "error_ball",
    ] {
        assert!(
            items.iter().any(|l| l.contains(name)),
            "missing {name} in {stdout}"
        );
    }
    let any_fail = items.iter().any(|l| l.starts_with("[FAIL]"));
    assert_eq!(o.status.code(), Some(if any_fail { 4 } else { 0 }));
    assert!(items
        .iter()
        .find(|l| l.contains("lipschitz_bound"))
        .unwrap()
        .starts_with("[PASS]"));
}
