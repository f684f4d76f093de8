//! Tracking controllers: plain LQR, the online-learning FRIDAY loop, an
//! adaptive basis-function baseline, and a controller driven by a frozen
//! pre-trained estimator. Also the contraction and error-ball diagnostics.

mod adaptive;
mod diagnostics;
mod friday;

pub use adaptive::{AdaptiveBasis, AdaptiveController};
pub use diagnostics::{
    error_ball_radius, estimate_rho, fixed_point_iterate, BallContext, ErrorBallReport, FixedPoint,
};
pub(crate) use friday::Silent;
pub use friday::{FridayController, FridayStep, StepEvent, StepObserver};

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{dot, LinalgError, Matrix};
use crate::mlp::{MlpError, MlpNetwork};
use crate::plant::Reference;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("adaptive weight estimate became non-finite")]
    AdaptationBlowUp,
    #[error(
        "fixed-point iteration did not converge in {iterations} iterations (last gap {last_gap:e})"
    )]
    NoConvergence { iterations: usize, last_gap: f64 },
    #[error("error-ball hypothesis violated: c1·λ − c2·c3·ρ·L_R = {denominator:e} ≤ 0")]
    InfeasibleBall { denominator: f64 },
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("estimator: {0}")]
    Estimator(String),
}

/// `u = −K(x − x_r) + u_r` for a single-input gain `K` (1×n).
///
/// Panics if the shapes disagree.
pub fn lqr_step(gain_k: &Matrix, x: &[f64], reference: &Reference) -> f64 {
    assert_eq!(gain_k.rows(), 1, "single-input gain expected");
    assert_eq!(gain_k.cols(), x.len(), "gain/state dimension mismatch");
    assert_eq!(
        x.len(),
        reference.x_r.len(),
        "state/reference dimension mismatch"
    );
    let z: Vec<f64> = x.iter().zip(&reference.x_r).map(|(a, b)| a - b).collect();
    -dot(gain_k.row_slice(0), &z) + reference.u_r
}

/// Anything that maps `[x, u]` to a scalar residual force estimate.
pub trait ResidualEstimator {
    fn estimate(&self, input: &[f64]) -> Result<f64, ControlError>;
}

impl ResidualEstimator for MlpNetwork {
    fn estimate(&self, input: &[f64]) -> Result<f64, ControlError> {
        Ok(self.forward(input)?[0])
    }
}

/// Cancellation controller with a fixed, offline-trained estimator:
/// `u_k = −K(x_k − x_r) + u_r − R̂(x_k, u_{k−1})`.
pub struct FrozenController {
    gain_k: Matrix,
    estimator: Arc<dyn ResidualEstimator + Send + Sync>,
    last_u: f64,
}

impl FrozenController {
    pub fn new(gain_k: Matrix, estimator: Arc<dyn ResidualEstimator + Send + Sync>) -> Self {
        Self {
            gain_k,
            estimator,
            last_u: 0.0,
        }
    }

    /// Returns `(u, R̂, fallback)`; a failed or non-finite estimate falls
    /// back to plain LQR.
    pub fn step(&mut self, x: &[f64], reference: &Reference) -> (f64, f64, bool) {
        let base = lqr_step(&self.gain_k, x, reference);
        let mut input = x.to_vec();
        input.push(self.last_u);
        let (u, r_hat, fallback) = match self.estimator.estimate(&input) {
            Ok(r) if r.is_finite() => (base - r, r, false),
            Ok(r) => (base, r, true),
            Err(_) => (base, f64::NAN, true),
        };
        self.last_u = u;
        (u, r_hat, fallback)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::reference_setpoint;

    #[test]
    fn lqr_step_examples() {
        let k = Matrix::row(&[2.0, 1.0]);
        assert_eq!(lqr_step(&k, &[1.0, 0.0], &reference_setpoint(1.0)), 0.0);
        assert_eq!(lqr_step(&k, &[1.0, 0.0], &reference_setpoint(0.0)), -2.0);
        let r = Reference {
            x_r: vec![0.0, 0.0],
            u_r: 0.75,
        };
        assert_eq!(lqr_step(&k, &[0.0, 0.0], &r), 0.75);
    }

    #[test]
    fn frozen_zero_net_is_lqr() {
        let net =
            MlpNetwork::from_weights(vec![Matrix::zeros(4, 3), Matrix::zeros(1, 4)], 1.0).unwrap();
        let k = Matrix::row(&[4.0, 3.0]);
        let mut c = FrozenController::new(k.clone(), Arc::new(net));
        let r = reference_setpoint(1.0);
        let (u, r_hat, fb) = c.step(&[0.2, -0.1], &r);
        assert_eq!(u, lqr_step(&k, &[0.2, -0.1], &r));
        assert_eq!(r_hat, 0.0);
        assert!(!fb);
    }
}
