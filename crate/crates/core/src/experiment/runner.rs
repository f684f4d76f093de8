use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{
    ControllerKind, ExperimentConfig, ExperimentError, LogRow, ObservationMode, ReferenceConfig,
    StepFlags, TrajectoryLog,
};
use crate::control::{
    lqr_step, AdaptiveController, FridayController, FrozenController, ResidualEstimator, Silent,
    StepObserver,
};
use crate::linalg::{solve_care, Matrix, RiccatiSolution};
use crate::mlp::MlpNetwork;
use crate::plant::{
    acceleration_estimate, observe_residual, reference_setpoint, reference_sine, simulate_hold,
    truth_accel, LtiModel, Reference, SimState,
};

/// Shared, read-only estimator for the pre-trained controller variants.
pub type SharedEstimator = Arc<dyn ResidualEstimator + Send + Sync>;

const CARE_TOL: f64 = 1e-12;

/// Seed of the mini-batch sampler for a trial; the network initialization
/// uses the trial seed itself.
pub fn minibatch_seed(seed: u64) -> u64 {
    seed ^ 0x6d69_6e69_6261_7463
}

fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x6e6f_6973_6500_0000
}

/// Nominal model and LQR synthesis shared by every controller.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<(LtiModel, RiccatiSolution), ExperimentError> {
    let lti = LtiModel::car(cfg.mass)?;
    let q = Matrix::from_diag(&cfg.lqr.q);
    let r = Matrix::from_diag(&[cfg.lqr.r]);
    let sol = solve_care(&lti.a, &lti.b, &q, &r, CARE_TOL)?;
    Ok((lti, sol))
}

pub fn reference_at(cfg: &ExperimentConfig, t: f64) -> Reference {
    match cfg.reference {
        ReferenceConfig::Setpoint { target } => reference_setpoint(target),
        ReferenceConfig::Sine { omega } => reference_sine(t, omega, cfg.mass),
    }
}

enum Active {
    Lqr,
    Friday(Box<FridayController>),
    Adaptive(AdaptiveController),
    Frozen(FrozenController),
}

struct Output {
    u: f64,
    r_hat: Option<f64>,
    loss: Option<f64>,
    flags: StepFlags,
}

fn build_controller(
    cfg: &ExperimentConfig,
    seed: u64,
    sol: &RiccatiSolution,
    lti: &LtiModel,
    pretrained: Option<&SharedEstimator>,
) -> Result<Active, ExperimentError> {
    let k = sol.gain_k.clone();
    Ok(match cfg.controller {
        ControllerKind::Lqr => Active::Lqr,
        ControllerKind::Friday | ControllerKind::FridayNoSn => {
            let net = MlpNetwork::init(&cfg.network.layer_sizes, seed)?
                .with_zeta(cfg.network.zeta)
                .with_sn_mode(cfg.network.sn_mode);
            let sn = cfg.controller == ControllerKind::Friday;
            let c = FridayController::new(k, net, cfg.training, sn, minibatch_seed(seed))?
                .with_dataset_capacity(cfg.network.dataset_capacity)
                .with_input_scaling(cfg.network.input_scaling);
            Active::Friday(Box::new(c))
        }
        ControllerKind::Adaptive => Active::Adaptive(AdaptiveController::new(
            cfg.adaptive.gamma,
            &sol.p,
            &lti.b,
            cfg.adaptive.basis,
        )?),
        ControllerKind::FridayPretrainedGp
        | ControllerKind::FridayPretrainedDnn
        | ControllerKind::FridayPretrainedSnDnn => {
            let est = pretrained.ok_or_else(|| {
                ExperimentError::Config("pre-trained controller needs a trained estimator".into())
            })?;
            Active::Frozen(FrozenController::new(k, Arc::clone(est)))
        }
    })
}

fn header(cfg: &ExperimentConfig, seed: u64) -> Vec<String> {
    let mut h = vec![
        format!("trial_seed = {seed}"),
        format!("network_init_seed = {seed}"),
        format!("minibatch_seed = {}", minibatch_seed(seed)),
    ];
    h.extend(
        cfg.to_toml()
            .lines()
            .filter(|l| !l.is_empty())
            .map(String::from),
    );
    h
}

/// One closed-loop trial. Plant divergence or a numerical controller
/// failure ends the trial early and marks the log as diverged.
pub fn run_trial(
    cfg: &ExperimentConfig,
    seed: u64,
    pretrained: Option<&SharedEstimator>,
) -> Result<TrajectoryLog, ExperimentError> {
    run_trial_observed(cfg, seed, pretrained, &mut Silent)
}

/// [`run_trial`] with the online controller's step events forwarded to
/// `observer`.
pub fn run_trial_observed(
    cfg: &ExperimentConfig,
    seed: u64,
    pretrained: Option<&SharedEstimator>,
    observer: &mut dyn StepObserver,
) -> Result<TrajectoryLog, ExperimentError> {
    cfg.validate()?;
    let (lti, sol) = synthesize(cfg)?;
    let truth = cfg.truth.build(cfg.mass, cfg.duration.max(1e-9))?;
    let mut ctrl = build_controller(cfg, seed, &sol, &lti, pretrained)?;
    let mut log = TrajectoryLog::new(header(cfg, seed));

    let period = cfg.control_period();
    let substeps = cfg.substeps();
    let dt = period / substeps as f64;
    let noise = Normal::new(0.0, cfg.accel_noise_std)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed(seed));

    let mut state = SimState {
        p: cfg.initial_p,
        pdot: cfg.initial_pdot,
        t: 0.0,
    };
    let mut r_obs_prev: Option<f64> = None;
    let mut busy = 0.0;

    for k in 0..cfg.steps() {
        state.t = k as f64 * period;
        let reference = reference_at(cfg, state.t);
        let x = state.x();

        let started = Instant::now();
        let out = match &mut ctrl {
            Active::Lqr => Ok(Output {
                u: lqr_step(&sol.gain_k, &x, &reference),
                r_hat: None,
                loss: None,
                flags: StepFlags::default(),
            }),
            Active::Friday(c) => c
                .step_observed(&x, &reference, r_obs_prev, observer)
                .map(|s| Output {
                    u: s.u,
                    r_hat: Some(s.r_hat),
                    loss: s.loss,
                    flags: s.flags,
                }),
            Active::Adaptive(c) => {
                c.step(&sol.gain_k, &x, &reference, period)
                    .map(|(u, r)| Output {
                        u,
                        r_hat: Some(r),
                        loss: None,
                        flags: StepFlags::default(),
                    })
            }
            Active::Frozen(c) => {
                let (u, r, fallback) = c.step(&x, &reference);
                Ok(Output {
                    u,
                    r_hat: Some(r),
                    loss: None,
                    flags: StepFlags {
                        fallback,
                        ..StepFlags::default()
                    },
                })
            }
        };
        busy += started.elapsed().as_secs_f64();
        let mut out = match out {
            Ok(o) => o,
            Err(e) => {
                log.diverged = true;
                log.header.push(format!("failure = \"step {k}: {e}\""));
                break;
            }
        };

        let r_true = truth.residual(&state, out.u);
        let next = simulate_hold(&truth, &state, out.u, dt, substeps);
        let row = |flags: StepFlags, out: &Output| LogRow {
            t: state.t,
            p: state.p,
            pdot: state.pdot,
            pr: reference.x_r[0],
            prdot: reference.x_r[1],
            u: out.u,
            r_true,
            r_hat: out.r_hat,
            loss: out.loss,
            flags,
        };
        match next {
            Ok(next) => {
                let accel = match cfg.observation {
                    ObservationMode::Oracle => truth_accel(&truth, &state, out.u),
                    ObservationMode::Measured => {
                        let n = if cfg.accel_noise_std > 0.0 {
                            noise.sample(&mut noise_rng)
                        } else {
                            0.0
                        };
                        acceleration_estimate(next.pdot, state.pdot, period) + n
                    }
                };
                r_obs_prev = Some(observe_residual(accel, out.u, cfg.mass));
                log.push(row(out.flags, &out));
                state = next;
            }
            Err(e) => {
                out.flags.diverged = true;
                log.push(row(out.flags, &out));
                log.header.push(format!("failure = \"step {k}: {e}\""));
                break;
            }
        }
    }
    log.train_wall_time = busy;
    Ok(log)
}

/// One trial per configured seed. `parallel > 1` runs trials on a worker
/// pool; the per-seed logs are identical to a serial run.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    parallel: usize,
    pretrained: Option<&SharedEstimator>,
) -> Result<Vec<TrajectoryLog>, ExperimentError> {
    cfg.validate()?;
    let owned;
    let pretrained = match (pretrained, needs_pretrained(cfg.controller)) {
        (Some(p), _) => Some(p),
        (None, true) => {
            owned = super::compare::train_for(cfg)?;
            Some(&owned)
        }
        (None, false) => None,
    };
    if parallel <= 1 {
        return cfg
            .seeds
            .iter()
            .map(|&s| run_trial(cfg, s, pretrained))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&s| run_trial(cfg, s, pretrained))
            .collect()
    })
}

fn needs_pretrained(kind: ControllerKind) -> bool {
    matches!(
        kind,
        ControllerKind::FridayPretrainedGp
            | ControllerKind::FridayPretrainedDnn
            | ControllerKind::FridayPretrainedSnDnn
    )
}
