use std::sync::Arc;

use friday_core::control::estimate_rho;
use friday_core::experiment::{
    emit_logs, mean_estimation_error, metrics, run_experiment, run_trial, trial_path,
    ControllerKind, ExperimentConfig, ReferenceConfig, SharedEstimator, TrajectoryLog, TruthConfig,
};
use friday_core::linalg::Matrix;
use friday_core::mlp::MlpNetwork;

fn short(controller: ControllerKind, truth: TruthConfig) -> ExperimentConfig {
    ExperimentConfig {
        controller,
        truth,
        duration: 5.0,
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    }
}

/// CSV text without the wall-time header line.
fn deterministic_part(log: &TrajectoryLog) -> String {
    log.to_csv_string()
        .lines()
        .filter(|l| !l.starts_with("# wall_time_s"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn repeated_runs_are_identical() {
    let cfg = short(ControllerKind::Friday, TruthConfig::Multi);
    let a = run_trial(&cfg, 3, None).unwrap();
    let b = run_trial(&cfg, 3, None).unwrap();
    assert_eq!(deterministic_part(&a), deterministic_part(&b));
    let c = run_trial(&cfg, 4, None).unwrap();
    assert_ne!(deterministic_part(&a), deterministic_part(&c));
}

#[test]
fn parallel_matches_serial() {
    let cfg = ExperimentConfig {
        seeds: vec![0, 1, 2, 3],
        ..short(ControllerKind::Friday, TruthConfig::Multi)
    };
    let serial = run_experiment(&cfg, 1, None).unwrap();
    let parallel = run_experiment(&cfg, 4, None).unwrap();
    for (s, p) in serial.iter().zip(&parallel) {
        assert_eq!(deterministic_part(s), deterministic_part(p));
    }
}

#[test]
fn metrics_survive_a_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        seeds: (0..10).collect(),
        duration: 2.0,
        ..short(
            ControllerKind::Friday,
            TruthConfig::Enviro(Default::default()),
        )
    };
    let logs = run_experiment(&cfg, 2, None).unwrap();
    let paths = emit_logs(dir.path(), "trial", &cfg, &logs).unwrap();
    assert_eq!(paths.len(), 10);
    for (seed, (log, path)) in logs.iter().zip(&paths).enumerate() {
        assert_eq!(path, &trial_path(dir.path(), "trial", seed as u64));
        let back = TrajectoryLog::read_csv(path).unwrap();
        assert_eq!(back.rows, log.rows);
        assert_eq!(back.diverged, log.diverged);
        let (m1, m2) = (metrics(log, 0.5).unwrap(), metrics(&back, 0.5).unwrap());
        assert_eq!(m1.mean_tracking_error, m2.mean_tracking_error);
        assert_eq!(m1.mean_estimation_error, m2.mean_estimation_error);
        assert_eq!(m1.final_offset, m2.final_offset);
    }
}

#[test]
fn lqr_settles_on_the_nominal_plant() {
    let cfg = ExperimentConfig {
        reference: ReferenceConfig::Setpoint { target: 1.0 },
        duration: 10.0,
        seeds: vec![0],
        ..short(ControllerKind::Lqr, TruthConfig::Nominal)
    };
    let log = run_trial(&cfg, 0, None).unwrap();
    let last = log.rows.last().unwrap();
    assert!((last.p - 1.0).abs() <= 0.02, "p = {}", last.p);
    assert!(!log.has_estimator());
    assert!(metrics(&log, 0.0).unwrap().mean_estimation_error.is_none());
}

#[test]
fn step_count_and_times() {
    let cfg = ExperimentConfig {
        duration: 1.03,
        ..short(ControllerKind::Lqr, TruthConfig::Multi)
    };
    let log = run_trial(&cfg, 0, None).unwrap();
    // trailing partial period dropped
    assert_eq!(log.len(), 20);
    for (k, r) in log.rows.iter().enumerate() {
        assert!((r.t - k as f64 * 0.05).abs() < 1e-12);
    }
}

#[test]
fn reference_terms_are_logged() {
    let cfg = short(ControllerKind::Lqr, TruthConfig::Nominal);
    let log = run_trial(&cfg, 0, None).unwrap();
    let ReferenceConfig::Sine { omega } = cfg.reference else {
        unreachable!()
    };
    for r in &log.rows {
        assert!((r.pr - (omega * r.t).sin()).abs() < 1e-11);
        assert!((r.prdot - omega * (omega * r.t).cos()).abs() < 1e-11);
        assert_eq!(r.r_true, 0.0);
    }
}

#[test]
fn rho_estimate_is_stable_across_seeds() {
    let cfg = ExperimentConfig {
        seeds: vec![0, 1, 2],
        duration: 10.0,
        ..short(
            ControllerKind::Friday,
            TruthConfig::Enviro(Default::default()),
        )
    };
    let rhos: Vec<f64> = run_experiment(&cfg, 1, None)
        .unwrap()
        .iter()
        .map(|l| estimate_rho(l).unwrap())
        .collect();
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    for r in &rhos {
        assert!((r - mean).abs() <= 0.5 * mean, "{rhos:?}");
    }
}

#[test]
fn config_errors() {
    assert!(ExperimentConfig::from_toml("duration = -1.0").is_err());
    assert!(ExperimentConfig::from_toml("control_rate = 20.0\nsim_substep = 0.03").is_err());
    assert!(ExperimentConfig::from_toml("seeds = []").is_err());
    assert!(ExperimentConfig::from_toml("no_such_key = 1").is_err());
    let e = ExperimentConfig::from_toml("[network]\nlayer_sizes = [2, 1]").unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let ok = ExperimentConfig::from_toml("").unwrap();
    assert_eq!(ok, ExperimentConfig::default());
    assert_eq!(ExperimentConfig::from_toml(&ok.to_toml()).unwrap(), ok);
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&path).unwrap();
            ExperimentConfig::from_toml(&text)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn zero_estimator_error_is_mean_residual() {
    let zero =
        MlpNetwork::from_weights(vec![Matrix::zeros(4, 3), Matrix::zeros(1, 4)], 1.0).unwrap();
    let est: SharedEstimator = Arc::new(zero);
    let cfg = short(ControllerKind::FridayPretrainedDnn, TruthConfig::Multi);
    let log = run_trial(&cfg, 0, Some(&est)).unwrap();
    let mean_r = log.rows.iter().map(|r| r.r_true.abs()).sum::<f64>() / log.len() as f64;
    assert!(mean_r > 0.0);
    assert!((mean_estimation_error(&log).unwrap() - mean_r).abs() <= 1e-12 * mean_r);
    assert!(run_trial(&cfg, 0, None).is_err());
}
