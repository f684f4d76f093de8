use super::{lqr_step, ControlError, FridayController};
use crate::experiment::TrajectoryLog;
use crate::linalg::{spectral_norm, StabilityConstants};
use crate::plant::Reference;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub u: f64,
    /// Applications of `F` before the confirming one.
    pub iterations: usize,
    /// `|u_{i+1} − u_i|` for every application, the last one `≤ tol`.
    pub gaps: Vec<f64>,
}

/// Iterates `u ← F(u) = −K(x − x_r) + u_r − R̂(x, u)` with the network and
/// state frozen until `|Δu| ≤ tol`.
pub fn fixed_point_iterate(
    ctrl: &FridayController,
    x: &[f64],
    reference: &Reference,
    u0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint, ControlError> {
    if !(tol > 0.0) {
        return Err(ControlError::InvalidArgument(format!(
            "tol must be > 0, got {tol}"
        )));
    }
    let base = lqr_step(ctrl.gain(), x, reference);
    let mut u = u0;
    let mut gaps = Vec::new();
    for _ in 0..max_iter {
        let next = base - ctrl.predict(x, u)?;
        let gap = (next - u).abs();
        gaps.push(gap);
        u = next;
        if gap <= tol {
            return Ok(FixedPoint {
                u,
                iterations: gaps.len() - 1,
                gaps,
            });
        }
        if !gap.is_finite() {
            break;
        }
    }
    Err(ControlError::NoConvergence {
        iterations: gaps.len(),
        last_gap: gaps.last().copied().unwrap_or(f64::NAN),
    })
}

/// Run-specific quantities the ball radius depends on besides the
/// Lyapunov constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BallContext {
    /// Tracking error at the initial time.
    pub z0: Vec<f64>,
    /// `max ‖u_r(t)‖`.
    pub u_r_max: f64,
    /// `max ‖R(x, u)‖` over the run.
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBallReport {
    /// Radius of the ultimate error ball.
    pub radius: f64,
    pub r_z: f64,
    pub r_u: f64,
    /// `c1·λ − c2·c3·ρ·L_R`.
    pub denominator: f64,
    pub feasibility_ok: bool,
}

/// Ultimate-bound radii for `‖z‖` and `‖u‖` given the learning error bound
/// `eps_m` and network Lipschitz constant `l_r`.
pub fn error_ball_radius(
    consts: &StabilityConstants,
    ctx: &BallContext,
    l_r: f64,
    eps_m: f64,
) -> Result<ErrorBallReport, ControlError> {
    if !(eps_m >= 0.0) || !(l_r >= 0.0) {
        return Err(ControlError::InvalidArgument(format!(
            "eps_m and l_r must be >= 0, got {eps_m}, {l_r}"
        )));
    }
    let c = consts;
    let denominator = c.c1 * c.lambda - c.c2 * c.c3 * c.rho * l_r;
    if !(denominator > 0.0) {
        return Err(ControlError::InfeasibleBall { denominator });
    }
    let lam_inv = c.lam_chol.inverse()?;
    let sigma_lam_inv = spectral_norm(&lam_inv, 1e-14, 100_000)?;
    let lam_z0 = c.lam_chol.matvec(&ctx.z0)?;
    let gain = c.c2 * c.c3 * c.c1.sqrt() / denominator;
    let radius = sigma_lam_inv * gain * eps_m;
    let r_z = sigma_lam_inv * (crate::linalg::norm2(&lam_z0) + gain * eps_m);
    let r_u = c.sigma_k * r_z + ctx.u_r_max + eps_m + ctx.r_max;
    Ok(ErrorBallReport {
        radius,
        r_z,
        r_u,
        denominator,
        feasibility_ok: r_z <= c.r_x && r_u <= c.r_u,
    })
}

/// Empirical `ρ = max_k |u_k − u_{k−1}| / ‖z_k‖` over steps with
/// `‖z_k‖ > 1e-9`.
pub fn estimate_rho(log: &TrajectoryLog) -> Result<f64, ControlError> {
    let mut best: Option<f64> = None;
    for w in log.rows.windows(2) {
        let z = w[1].z_norm();
        if z > 1e-9 {
            let ratio = (w[1].u - w[0].u).abs() / z;
            best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
        }
    }
    best.ok_or_else(|| {
        ControlError::InsufficientData("need two steps with ‖z‖ > 1e-9 to estimate ρ".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{LogRow, StepFlags};
    use crate::linalg::Matrix;
    use crate::mlp::{MlpNetwork, TrainingHyper};
    use crate::plant::reference_setpoint;

    fn row(t: f64, z: f64, u: f64) -> LogRow {
        LogRow {
            t,
            p: z,
            pdot: 0.0,
            pr: 0.0,
            prdot: 0.0,
            u,
            r_true: 0.0,
            r_hat: None,
            loss: None,
            flags: StepFlags::default(),
        }
    }

    #[test]
    fn rho_examples() {
        let mut log = TrajectoryLog::default();
        for k in 0..5 {
            log.push(row(k as f64, 1.0, 2.0));
        }
        assert_eq!(estimate_rho(&log).unwrap(), 0.0);

        let mut jump = TrajectoryLog::default();
        jump.push(row(0.0, 1.0, 0.0));
        jump.push(row(1.0, 1.0, 0.5));
        assert_eq!(estimate_rho(&jump).unwrap(), 0.5);

        let mut flat = TrajectoryLog::default();
        flat.push(row(0.0, 0.0, 0.0));
        flat.push(row(1.0, 0.0, 1.0));
        assert!(matches!(
            estimate_rho(&flat),
            Err(ControlError::InsufficientData(_))
        ));
    }

    fn consts(rho: f64) -> StabilityConstants {
        StabilityConstants {
            lambda: 2.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            lam_chol: Matrix::identity(2),
            rho,
            r_x: 10.0,
            r_u: 10.0,
            sigma_k: 1.0,
        }
    }

    #[test]
    fn ball_examples() {
        let ctx = BallContext {
            z0: vec![1.0, 0.0],
            u_r_max: 0.0,
            r_max: 1.0,
        };
        let rep = error_ball_radius(&consts(0.0), &ctx, 123.0, 0.0).unwrap();
        assert_eq!(rep.radius, 0.0);
        assert_eq!(rep.denominator, 2.0);
        assert!((rep.r_z - 1.0).abs() < 1e-12);
        assert!(rep.feasibility_ok);

        let rep = error_ball_radius(&consts(0.5), &ctx, 1.0, 0.3).unwrap();
        assert!((rep.denominator - 1.5).abs() < 1e-15);
        assert!((rep.radius - 0.2).abs() < 1e-12);

        assert!(matches!(
            error_ball_radius(&consts(2.0), &ctx, 1.0, 0.3),
            Err(ControlError::InfeasibleBall { .. })
        ));
    }

    #[test]
    fn zero_net_fixed_point_is_lqr() {
        let net =
            MlpNetwork::from_weights(vec![Matrix::zeros(4, 3), Matrix::zeros(1, 4)], 1.0).unwrap();
        let k = Matrix::row(&[2.0, 1.0]);
        let c = FridayController::new(k.clone(), net, TrainingHyper::default(), true, 0).unwrap();
        let r = reference_setpoint(1.0);
        let fp = fixed_point_iterate(&c, &[0.0, 0.0], &r, 5.0, 1e-12, 10).unwrap();
        assert_eq!(fp.u, 2.0);
        assert_eq!(fp.iterations, 1);
    }
}
