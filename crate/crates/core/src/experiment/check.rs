//! Diagnostic suite run on a live FRIDAY trial: Lipschitz bound and audit,
//! contraction of the control map, fixed-point convergence, and the
//! post-hoc error-ball consistency check.

use super::{
    reference_at, run_trial_observed, synthesize, ControllerKind, ExperimentConfig,
    ExperimentError, TrajectoryLog,
};
use crate::control::{
    error_ball_radius, estimate_rho, fixed_point_iterate, lqr_step, BallContext, ControlError,
    ErrorBallReport, FridayController, StepEvent,
};
use crate::linalg::{stability_constants, RiccatiSolution};
use crate::mlp::MlpNetwork;
use crate::plant::LtiModel;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative slack allowed on every Lipschitz-type inequality.
pub const LIP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckItem {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Network and state captured at one control step.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub net: MlpNetwork,
    pub x: Vec<f64>,
}

/// Post-hoc inputs and result of the error-ball check for one log.
#[derive(Debug, Clone)]
pub struct ErrorBallOutcome {
    pub rho: f64,
    pub eps_m: f64,
    pub r_max: f64,
    pub l_r: f64,
    /// `max ‖z‖` over the steady-state tail of the run.
    pub steady_max_z: f64,
    pub report: Result<ErrorBallReport, f64>,
}

impl ErrorBallOutcome {
    pub fn passed(&self) -> bool {
        matches!(&self.report, Ok(r) if r.denominator > 0.0 && self.steady_max_z <= r.radius)
    }
}

/// Measures `ε_m = max|R − R̂|`, `R_m = max|R|` and `ρ` from `log`, then
/// evaluates the ball radius with `L_R = ζ`.
pub fn error_ball_check(
    cfg: &ExperimentConfig,
    log: &TrajectoryLog,
    lti: &LtiModel,
    sol: &RiccatiSolution,
) -> Result<ErrorBallOutcome, ExperimentError> {
    let rows = &log.rows;
    if rows.is_empty() {
        return Err(ExperimentError::Metrics("empty trajectory log".into()));
    }
    let rho = estimate_rho(log)?;
    let eps_m = rows
        .iter()
        .filter_map(|r| r.r_hat.map(|h| (r.r_true - h).abs()))
        .fold(0.0, f64::max);
    let r_max = rows.iter().map(|r| r.r_true.abs()).fold(0.0, f64::max);
    let u_r_max = rows
        .iter()
        .map(|r| reference_at(cfg, r.t).u_r.abs())
        .fold(0.0, f64::max);
    let l_r = cfg.network.zeta;
    let consts = stability_constants(
        sol,
        &lti.a,
        &lti.b,
        &sol.gain_k,
        rho,
        cfg.check.r_x,
        cfg.check.r_u,
    )?;
    let ctx = BallContext {
        z0: rows[0].z().to_vec(),
        u_r_max,
        r_max,
    };
    let tail_start = ((1.0 - cfg.check.steady_fraction) * rows.len() as f64).floor() as usize;
    let steady_max_z = rows[tail_start.min(rows.len() - 1)..]
        .iter()
        .map(|r| r.z_norm())
        .fold(0.0, f64::max);
    let report = match error_ball_radius(&consts, &ctx, l_r, eps_m) {
        Ok(r) => Ok(r),
        Err(ControlError::InfeasibleBall { denominator }) => Err(denominator),
        Err(e) => return Err(e.into()),
    };
    Ok(ErrorBallOutcome {
        rho,
        eps_m,
        r_max,
        l_r,
        steady_max_z,
        report,
    })
}

fn u_range(log: &TrajectoryLog) -> (f64, f64) {
    let lo = log.rows.iter().map(|r| r.u).fold(f64::INFINITY, f64::min);
    let hi = log
        .rows
        .iter()
        .map(|r| r.u)
        .fold(f64::NEG_INFINITY, f64::max);
    (lo - 1.0, hi + 1.0)
}

/// Runs a FRIDAY trial on `cfg` (first seed) and evaluates every
/// diagnostic. Input scaling must be off so the network sees raw `(x, u)`.
pub fn run_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckItem>, ExperimentError> {
    if cfg.network.input_scaling {
        return Err(ExperimentError::Config(
            "check suite requires network.input_scaling = false".into(),
        ));
    }
    let cfg = ExperimentConfig {
        controller: ControllerKind::Friday,
        ..cfg.clone()
    };
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let zeta = cfg.network.zeta;
    let every = cfg.check.audit_every;

    let mut worst_bound: f64 = 0.0;
    let mut bound_err: Option<String> = None;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut step = 0usize;
    let mut observer = |e: &StepEvent<'_>| {
        if let StepEvent::Predicted { net, x, .. } = e {
            match net.lipschitz_upper_bound() {
                Ok(b) => worst_bound = worst_bound.max(b),
                Err(err) => bound_err = Some(err.to_string()),
            }
            if step.is_multiple_of(every) {
                snapshots.push(Snapshot {
                    step,
                    net: (*net).clone(),
                    x: x.to_vec(),
                });
            }
            step += 1;
        }
    };
    let log = run_trial_observed(&cfg, seed, None, &mut observer)?;
    let (lti, sol) = synthesize(&cfg)?;
    let mut items = Vec::new();

    items.push(CheckItem::new(
        "lipschitz_bound",
        bound_err.is_none() && worst_bound <= zeta * (1.0 + LIP_SLACK),
        match &bound_err {
            Some(e) => e.clone(),
            None => format!("max ∏σ(W) = {worst_bound:.12} over {step} steps (ζ = {zeta})"),
        },
    ));

    if log.is_empty() {
        items.push(CheckItem::new("trajectory", false, "empty run".into()));
        return Ok(items);
    }
    let (ulo, uhi) = u_range(&log);
    let lo = [
        log.rows.iter().map(|r| r.p).fold(f64::INFINITY, f64::min) - 0.5,
        log.rows
            .iter()
            .map(|r| r.pdot)
            .fold(f64::INFINITY, f64::min)
            - 0.5,
        ulo,
    ];
    let hi = [
        log.rows
            .iter()
            .map(|r| r.p)
            .fold(f64::NEG_INFINITY, f64::max)
            + 0.5,
        log.rows
            .iter()
            .map(|r| r.pdot)
            .fold(f64::NEG_INFINITY, f64::max)
            + 0.5,
        uhi,
    ];

    let mut worst_audit: f64 = 0.0;
    let mut worst_contraction: f64 = 0.0;
    let mut fp_detail = Vec::new();
    let mut fp_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc4ec);
    for snap in &snapshots {
        worst_audit = worst_audit.max(snap.net.empirical_lipschitz(
            &lo,
            &hi,
            cfg.check.audit_pairs,
            seed.wrapping_add(snap.step as u64),
        )?);
        let reference = reference_at(&cfg, snap.step as f64 * cfg.control_period());
        let ctrl =
            FridayController::new(sol.gain_k.clone(), snap.net.clone(), cfg.training, true, 0)?;
        let base = lqr_step(&sol.gain_k, &snap.x, &reference);
        for _ in 0..cfg.check.contraction_pairs {
            let u1 = rng.random_range(ulo..uhi);
            let u2 = rng.random_range(ulo..uhi);
            if u1 == u2 {
                continue;
            }
            let f1 = base - ctrl.predict(&snap.x, u1)?;
            let f2 = base - ctrl.predict(&snap.x, u2)?;
            worst_contraction = worst_contraction.max((f1 - f2).abs() / (u1 - u2).abs());
        }
        if zeta < 1.0 {
            let starts: Vec<f64> = (0..5).map(|i| ulo + (uhi - ulo) * i as f64 / 4.0).collect();
            let mut points = Vec::new();
            for &u0 in &starts {
                match fixed_point_iterate(&ctrl, &snap.x, &reference, u0, 1e-10, 10_000) {
                    Ok(fp) => {
                        for w in fp.gaps.windows(2) {
                            if w[0] > 1e-10 && w[1] > zeta * w[0] * (1.0 + LIP_SLACK) {
                                fp_ok = false;
                                fp_detail.push(format!(
                                    "step {}: gap ratio {}",
                                    snap.step,
                                    w[1] / w[0]
                                ));
                            }
                        }
                        points.push(fp.u);
                    }
                    Err(e) => {
                        fp_ok = false;
                        fp_detail.push(format!("step {}: {e}", snap.step));
                    }
                }
            }
            let spread = points.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                - points.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            if points.len() == starts.len() && spread > 1e-8 {
                fp_ok = false;
                fp_detail.push(format!(
                    "step {}: fixed points spread {spread:e}",
                    snap.step
                ));
            }
        }
    }
    items.push(CheckItem::new(
        "lipschitz_audit",
        worst_audit <= zeta * (1.0 + LIP_SLACK),
        format!(
            "max empirical ratio {worst_audit:.9} over {} snapshots × {} pairs",
            snapshots.len(),
            cfg.check.audit_pairs
        ),
    ));
    items.push(CheckItem::new(
        "contraction",
        worst_contraction <= zeta * (1.0 + LIP_SLACK),
        format!("max |F(u₁)−F(u₂)|/|u₁−u₂| = {worst_contraction:.9}"),
    ));
    items.push(if zeta < 1.0 {
        CheckItem::new(
            "fixed_point",
            fp_ok,
            if fp_detail.is_empty() {
                format!(
                    "5 starts converge to one point at {} snapshots",
                    snapshots.len()
                )
            } else {
                fp_detail.join("; ")
            },
        )
    } else {
        CheckItem::new(
            "fixed_point",
            true,
            format!("skipped: needs ζ < 1 (ζ = {zeta})"),
        )
    });

    if log.diverged {
        items.push(CheckItem::new("error_ball", false, "run diverged".into()));
        return Ok(items);
    }
    let ball = error_ball_check(&cfg, &log, &lti, &sol)?;
    let detail = match &ball.report {
        Ok(r) => format!(
            "ρ = {:.4}, ε_m = {:.4}, denominator = {:.4}, r = {:.6}, steady max ‖z‖ = {:.6}, r_z = {:.4}, r_u = {:.4}, feasible = {}",
            ball.rho, ball.eps_m, r.denominator, r.radius, ball.steady_max_z, r.r_z, r.r_u, r.feasibility_ok
        ),
        Err(d) => format!(
            "ρ = {:.4}, ε_m = {:.4}: c1·λ − c2·c3·ρ·L_R = {d:.4} ≤ 0",
            ball.rho, ball.eps_m
        ),
    };
    items.push(CheckItem::new("error_ball", ball.passed(), detail));
    Ok(items)
}
