use serde::{Deserialize, Serialize};

use super::{lqr_step, ControlError};
use crate::linalg::{dot, Matrix};
use crate::plant::Reference;

/// Regressor used by the adaptive baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveBasis {
    /// `[1, p, ṗ, p², ṗ², u, ṗu, ṗ²u, |u|ṗ]`.
    #[default]
    Standard,
    /// `[1, p, ṗ, u]`.
    Linear,
}

impl AdaptiveBasis {
    pub fn dim(self) -> usize {
        match self {
            Self::Standard => 9,
            Self::Linear => 4,
        }
    }

    pub fn eval(self, x: &[f64], u: f64) -> Vec<f64> {
        let (p, v) = (x[0], x[1]);
        match self {
            Self::Standard => vec![1.0, p, v, p * p, v * v, u, v * u, v * v * u, u.abs() * v],
            Self::Linear => vec![1.0, p, v, u],
        }
    }
}

/// Adaptive feedback-linearizing LQR:
/// `u = −K(x − x_r) + u_r − Ŵσ(x, u_{k−1})`, `Ŵ̇ = γ·(eᵀPB)·σᵀ`, integrated
/// with forward Euler once per control step.
#[derive(Debug, Clone)]
pub struct AdaptiveController {
    w_hat: Vec<f64>,
    gamma: f64,
    pb: Vec<f64>,
    basis: AdaptiveBasis,
    last_u: f64,
}

impl AdaptiveController {
    pub fn new(
        gamma: f64,
        p: &Matrix,
        b: &Matrix,
        basis: AdaptiveBasis,
    ) -> Result<Self, ControlError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ControlError::InvalidArgument(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
        if b.cols() != 1 {
            return Err(ControlError::DimensionMismatch {
                expected: 1,
                got: b.cols(),
            });
        }
        let pb = p.matmul(b)?.into_vec();
        Ok(Self {
            w_hat: vec![0.0; basis.dim()],
            gamma,
            pb,
            basis,
            last_u: 0.0,
        })
    }

    pub fn w_hat(&self) -> &[f64] {
        &self.w_hat
    }

    pub fn set_w_hat(&mut self, w: Vec<f64>) -> Result<(), ControlError> {
        if w.len() != self.basis.dim() {
            return Err(ControlError::DimensionMismatch {
                expected: self.basis.dim(),
                got: w.len(),
            });
        }
        self.w_hat = w;
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn basis(&self) -> AdaptiveBasis {
        self.basis
    }

    /// Returns `(u, Ŵσ)`.
    pub fn step(
        &mut self,
        gain_k: &Matrix,
        x: &[f64],
        reference: &Reference,
        dt: f64,
    ) -> Result<(f64, f64), ControlError> {
        if !(dt > 0.0) {
            return Err(ControlError::InvalidArgument(format!(
                "dt must be > 0, got {dt}"
            )));
        }
        if x.len() != self.pb.len() || x.len() < 2 {
            return Err(ControlError::DimensionMismatch {
                expected: self.pb.len(),
                got: x.len(),
            });
        }
        let sigma = self.basis.eval(x, self.last_u);
        let r_hat = dot(&self.w_hat, &sigma);
        let u = lqr_step(gain_k, x, reference) - r_hat;

        let e: Vec<f64> = x.iter().zip(&reference.x_r).map(|(a, b)| a - b).collect();
        let epb = dot(&e, &self.pb);
        for (w, s) in self.w_hat.iter_mut().zip(&sigma) {
            *w += dt * self.gamma * epb * s;
        }
        if self.w_hat.iter().any(|w| !w.is_finite()) {
            return Err(ControlError::AdaptationBlowUp);
        }
        self.last_u = u;
        Ok((u, r_hat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{reference_setpoint, reference_sine};

    fn setup() -> (Matrix, AdaptiveController) {
        let p = Matrix::from_rows(&[&[19.2, 6.7], &[6.7, 6.43]]);
        let b = Matrix::column(&[0.0, 1.0 / 1.5]);
        let k = Matrix::row(&[4.47, 4.29]);
        (
            k,
            AdaptiveController::new(0.03, &p, &b, AdaptiveBasis::Standard).unwrap(),
        )
    }

    #[test]
    fn zero_weights_reproduce_lqr() {
        let (k, mut c) = setup();
        let r = reference_sine(1.0, 0.3, 1.5);
        let x = [0.4, -0.2];
        let (u, r_hat) = c.step(&k, &x, &r, 0.05).unwrap();
        assert_eq!(u, lqr_step(&k, &x, &r));
        assert_eq!(r_hat, 0.0);
    }

    #[test]
    fn zero_error_leaves_weights() {
        let (k, mut c) = setup();
        c.set_w_hat(vec![0.1; 9]).unwrap();
        let r = reference_setpoint(1.0);
        c.step(&k, &[1.0, 0.0], &r, 0.05).unwrap();
        assert_eq!(c.w_hat(), &[0.1; 9]);
    }

    #[test]
    fn update_matches_law() {
        let (k, mut c) = setup();
        let r = reference_setpoint(0.0);
        let x = [0.5, 0.25];
        c.step(&k, &x, &r, 0.05).unwrap();
        // eᵀPB with PB = [6.7, 6.43]/1.5, σ at u_prev = 0
        let epb = (0.5 * 6.7 + 0.25 * 6.43) / 1.5;
        let sigma = [1.0, 0.5, 0.25, 0.25, 0.0625, 0.0, 0.0, 0.0, 0.0];
        for (w, s) in c.w_hat().iter().zip(sigma) {
            assert!((w - 0.05 * 0.03 * epb * s).abs() < 1e-15);
        }
    }

    #[test]
    fn blow_up_is_an_error() {
        let (k, mut c) = setup();
        c.set_w_hat(vec![f64::MAX; 9]).unwrap();
        let r = reference_setpoint(0.0);
        assert!(matches!(
            c.step(&k, &[1e200, 1e200], &r, 0.05),
            Err(ControlError::AdaptationBlowUp)
        ));
    }
}
