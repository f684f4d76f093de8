use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::runner::{run_experiment, synthesize, SharedEstimator};
use super::{
    mean_estimation_error, mean_tracking_error, ControllerKind, ExperimentConfig, ExperimentError,
    ObservationMode, ReferenceConfig, TruthConfig,
};
use crate::control::lqr_step;
use crate::dataset::ReplayDataset;
use crate::gp::{gp_fit, gp_fit_grid, GpModel};
use crate::mlp::{MlpNetwork, TrainingHyper};
use crate::plant::{
    acceleration_estimate, observe_residual, reference_setpoint, simulate_hold, truth_accel,
    SimState,
};

/// LQR run toward uniformly drawn setpoints, recording
/// `([p, ṗ, u_k], R̃_k)` at every control step.
pub fn collect_offline_data(cfg: &ExperimentConfig) -> Result<ReplayDataset, ExperimentError> {
    let o = &cfg.offline;
    let (_, sol) = synthesize(cfg)?;
    let truth = cfg.truth.build(cfg.mass, cfg.duration.max(1e-9))?;
    let mut rng = ChaCha8Rng::seed_from_u64(o.data_seed);
    let period = cfg.control_period();
    let substeps = cfg.substeps();
    let dt = period / substeps as f64;
    let steps = (o.collect_duration * cfg.control_rate + 1e-9).floor() as usize;
    let per_target = ((o.setpoint_interval * cfg.control_rate).round() as usize).max(1);

    let mut ds = ReplayDataset::new();
    let mut state = SimState::default();
    let mut target = reference_setpoint(0.0);
    for k in 0..steps {
        if k % per_target == 0 {
            target = reference_setpoint(rng.random_range(-o.setpoint_range..=o.setpoint_range));
        }
        state.t = k as f64 * period;
        let x = state.x();
        let u = lqr_step(&sol.gain_k, &x, &target);
        let next = simulate_hold(&truth, &state, u, dt, substeps)?;
        let accel = match cfg.observation {
            ObservationMode::Oracle => truth_accel(&truth, &state, u),
            ObservationMode::Measured => acceleration_estimate(next.pdot, state.pdot, period),
        };
        ds.append(&x, &[u], &[observe_residual(accel, u, cfg.mass)])?;
        state = next;
    }
    Ok(ds)
}

fn dataset_vectors(ds: &ReplayDataset) -> (Vec<Vec<f64>>, Vec<f64>) {
    (
        ds.inputs().cloned().collect(),
        ds.targets().map(|y| y[0]).collect(),
    )
}

/// Trains a fresh network on a fixed dataset with `steps` mini-batch
/// updates. With `sn`, every update is preceded by a one-power-step
/// normalization and the final network gets an exact one, so the returned
/// network meets the `ζ` budget. Returns the network and the wall time.
pub fn train_offline_network(
    layer_sizes: &[usize],
    zeta: f64,
    hyper: &TrainingHyper,
    ds: &ReplayDataset,
    steps: usize,
    sn: bool,
    seed: u64,
) -> Result<(MlpNetwork, f64), ExperimentError> {
    let start = Instant::now();
    let mut net = MlpNetwork::init(layer_sizes, seed)?.with_zeta(zeta);
    let mut rng = ChaCha8Rng::seed_from_u64(super::runner::minibatch_seed(seed));
    for _ in 0..steps {
        if sn {
            net.normalize_lipschitz_estimated(1)?;
        }
        let (xs, ys) = ds.sample_minibatch(hyper.batch_size, &mut rng)?;
        let (_, grads) = net.loss_and_gradients(&xs, &ys)?;
        if grads.iter().all(|g| g.is_finite()) {
            net.sgd_momentum_step(&grads, hyper)?;
        }
    }
    if sn {
        net.normalize_lipschitz()?;
    }
    Ok((net, start.elapsed().as_secs_f64()))
}

const GRID_LENGTHSCALES: [f64; 4] = [0.3, 1.0, 3.0, 10.0];
const GRID_SIGNAL_VARS: [f64; 3] = [0.1, 1.0, 10.0];

pub fn fit_offline_gp(
    cfg: &ExperimentConfig,
    ds: &ReplayDataset,
) -> Result<GpModel, ExperimentError> {
    let (xs, ys) = dataset_vectors(ds);
    let o = &cfg.offline;
    Ok(if o.gp_grid_search {
        gp_fit_grid(
            &xs,
            &ys,
            o.gp_noise_var,
            &GRID_LENGTHSCALES,
            &GRID_SIGNAL_VARS,
        )?
    } else {
        gp_fit(&xs, &ys, o.gp_hyper())?
    })
}

/// Collects data and trains the estimator a pre-trained controller kind
/// needs.
pub fn train_for(cfg: &ExperimentConfig) -> Result<SharedEstimator, ExperimentError> {
    let ds = collect_offline_data(cfg)?;
    let net = |sn| {
        train_offline_network(
            &cfg.network.layer_sizes,
            cfg.network.zeta,
            &cfg.training,
            &ds,
            cfg.offline.dnn_steps,
            sn,
            cfg.offline.data_seed,
        )
        .map(|(n, _)| Arc::new(n) as SharedEstimator)
    };
    match cfg.controller {
        ControllerKind::FridayPretrainedGp => Ok(Arc::new(fit_offline_gp(cfg, &ds)?)),
        ControllerKind::FridayPretrainedDnn => net(false),
        ControllerKind::FridayPretrainedSnDnn => net(true),
        other => Err(ExperimentError::Config(format!(
            "controller {} does not use a pre-trained estimator",
            other.name()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRow {
    pub model: &'static str,
    pub n_train: usize,
    /// Offline training (or GP fit) wall time, seconds.
    pub wall_time: f64,
    /// Mean over seeds of the per-trial mean estimation error, N.
    pub mean_estimation_error: f64,
    pub mean_tracking_error: f64,
    /// Any trial of this model diverged.
    pub diverged: bool,
}

/// Offline SN-DNN, plain DNN and GP, each trained on the same LQR data and
/// then run frozen inside the cancellation controller on `cfg`'s scenario.
pub fn compare_estimators(
    cfg: &ExperimentConfig,
    parallel: usize,
) -> Result<Vec<EstimatorRow>, ExperimentError> {
    cfg.validate()?;
    if !matches!(cfg.reference, ReferenceConfig::Sine { .. })
        || !matches!(cfg.truth, TruthConfig::Enviro(_))
    {
        return Err(ExperimentError::Config(
            "compare-estimators expects a sine reference on the enviro truth model".into(),
        ));
    }
    let ds = collect_offline_data(cfg)?;
    let train = |sn| {
        train_offline_network(
            &cfg.network.layer_sizes,
            cfg.network.zeta,
            &cfg.training,
            &ds,
            cfg.offline.dnn_steps,
            sn,
            cfg.offline.data_seed,
        )
    };
    let (sn_net, sn_time) = train(true)?;
    let (plain_net, plain_time) = train(false)?;
    let gp = fit_offline_gp(cfg, &ds)?;
    let gp_time = gp.fit_wall_time;

    let models: [(&'static str, ControllerKind, SharedEstimator, f64); 3] = [
        (
            "sn_dnn",
            ControllerKind::FridayPretrainedSnDnn,
            Arc::new(sn_net),
            sn_time,
        ),
        (
            "dnn",
            ControllerKind::FridayPretrainedDnn,
            Arc::new(plain_net),
            plain_time,
        ),
        (
            "gp",
            ControllerKind::FridayPretrainedGp,
            Arc::new(gp),
            gp_time,
        ),
    ];
    let mut rows = Vec::new();
    for (model, kind, est, wall_time) in models {
        let run_cfg = ExperimentConfig {
            controller: kind,
            ..cfg.clone()
        };
        let logs = run_experiment(&run_cfg, parallel, Some(&est))?;
        let mut est_err = 0.0;
        let mut trk_err = 0.0;
        for log in &logs {
            est_err += mean_estimation_error(log)?;
            trk_err += mean_tracking_error(log, cfg.warmup)?;
        }
        rows.push(EstimatorRow {
            model,
            n_train: ds.len(),
            wall_time,
            mean_estimation_error: est_err / logs.len() as f64,
            mean_tracking_error: trk_err / logs.len() as f64,
            diverged: logs.iter().any(|l| l.diverged),
        });
    }
    Ok(rows)
}
