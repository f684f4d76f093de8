//! Exact Gaussian-process regression with a Matérn-5/2 kernel.

use std::time::Instant;

use thiserror::Error;

use crate::control::{ControlError, ResidualEstimator};
use crate::linalg::{dot, LinalgError, Matrix};

/// Diagonal jitter added on top of the noise variance before factorizing.
pub const JITTER: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("no training data")]
    Empty,
    #[error("inputs and targets differ in length ({inputs} vs {targets})")]
    Length { inputs: usize, targets: usize },
    #[error("training inputs must share one dimension")]
    RaggedInputs,
    #[error("invalid hyperparameter: {0}")]
    Hyper(String),
    #[error("kernel matrix is not positive definite; increase noise_var or the jitter")]
    NotPositiveDefinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self {
            lengthscale: 1.0,
            signal_var: 1.0,
            noise_var: 1e-2,
        }
    }
}

impl GpHyper {
    fn validate(&self) -> Result<(), GpError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.lengthscale) || !ok(self.signal_var) || !ok(self.noise_var) {
            return Err(GpError::Hyper(format!(
                "all must be finite and > 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `σ²·(1 + √5·d/ℓ + 5d²/(3ℓ²))·exp(−√5·d/ℓ)` with `d = ‖x − y‖`.
pub fn matern52(x: &[f64], y: &[f64], lengthscale: f64, signal_var: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let s = 5f64.sqrt() * d2.sqrt() / lengthscale;
    signal_var * (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[derive(Debug, Clone)]
pub struct GpModel {
    train_inputs: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    chol_l: Matrix,
    hyper: GpHyper,
    /// Seconds spent in [`gp_fit`] (kernel build, factorization, solve).
    pub fit_wall_time: f64,
}

impl GpModel {
    pub fn hyper(&self) -> GpHyper {
        self.hyper
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn chol_l(&self) -> &Matrix {
        &self.chol_l
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn len(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_inputs.is_empty()
    }
}

pub fn kernel_matrix(xs: &[Vec<f64>], lengthscale: f64, signal_var: f64) -> Matrix {
    let n = xs.len();
    let mut k = Matrix::zeros(n, n);
    let data = k.as_mut_slice();
    for i in 0..n {
        data[i * n + i] = signal_var;
        for j in 0..i {
            let v = matern52(&xs[i], &xs[j], lengthscale, signal_var);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    k
}

fn forward_sub(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = l.row_slice(i);
        y[i] = (b[i] - dot(&row[..i], &y[..i])) / row[i];
    }
    y
}

fn back_sub_transposed(l: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let data = l.as_slice();
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        x[i] /= data[i * n + i];
        let xi = x[i];
        for j in 0..i {
            x[j] -= data[i * n + j] * xi;
        }
    }
    x
}

/// Fits `α = (K + (σₙ² + jitter)·I)⁻¹·y` through a Cholesky factorization.
pub fn gp_fit(xs: &[Vec<f64>], ys: &[f64], hyper: GpHyper) -> Result<GpModel, GpError> {
    let start = Instant::now();
    hyper.validate()?;
    if xs.is_empty() {
        return Err(GpError::Empty);
    }
    if xs.len() != ys.len() {
        return Err(GpError::Length {
            inputs: xs.len(),
            targets: ys.len(),
        });
    }
    if xs.iter().any(|x| x.len() != xs[0].len()) {
        return Err(GpError::RaggedInputs);
    }
    let n = xs.len();
    let mut k = kernel_matrix(xs, hyper.lengthscale, hyper.signal_var);
    for i in 0..n {
        k.as_mut_slice()[i * n + i] += hyper.noise_var + JITTER;
    }
    let chol_l = k.cholesky().map_err(|e| match e {
        LinalgError::NotPositiveDefinite => GpError::NotPositiveDefinite,
        other => GpError::Linalg(other),
    })?;
    let alpha = back_sub_transposed(&chol_l, &forward_sub(&chol_l, ys));
    Ok(GpModel {
        train_inputs: xs.to_vec(),
        alpha,
        chol_l,
        hyper,
        fit_wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Predictive mean and variance (clipped at 0).
pub fn gp_predict(m: &GpModel, x: &[f64]) -> (f64, f64) {
    let h = m.hyper;
    let k_star: Vec<f64> = m
        .train_inputs
        .iter()
        .map(|xi| matern52(x, xi, h.lengthscale, h.signal_var))
        .collect();
    let mean = dot(&k_star, &m.alpha);
    let v = forward_sub(&m.chol_l, &k_star);
    let var = (h.signal_var - dot(&v, &v)).max(0.0);
    (mean, var)
}

/// Predictive mean only; `O(n)` per call.
pub fn gp_predict_mean(m: &GpModel, x: &[f64]) -> f64 {
    let h = m.hyper;
    m.train_inputs
        .iter()
        .zip(&m.alpha)
        .map(|(xi, a)| a * matern52(x, xi, h.lengthscale, h.signal_var))
        .sum()
}

/// Picks the lengthscale/signal variance pair from the grid that maximizes
/// the log marginal likelihood, then fits with it. The reported wall time
/// covers the whole search.
pub fn gp_fit_grid(
    xs: &[Vec<f64>],
    ys: &[f64],
    noise_var: f64,
    lengthscales: &[f64],
    signal_vars: &[f64],
) -> Result<GpModel, GpError> {
    let start = Instant::now();
    let mut best: Option<(f64, GpModel)> = None;
    for &ell in lengthscales {
        for &sv in signal_vars {
            let m = gp_fit(
                xs,
                ys,
                GpHyper {
                    lengthscale: ell,
                    signal_var: sv,
                    noise_var,
                },
            )?;
            let lml = log_marginal_likelihood(&m, ys);
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, m));
            }
        }
    }
    let (_, mut m) = best.ok_or_else(|| GpError::Hyper("empty hyperparameter grid".into()))?;
    m.fit_wall_time = start.elapsed().as_secs_f64();
    Ok(m)
}

/// `−½yᵀα − Σ log Lᵢᵢ − (n/2)·log 2π`.
pub fn log_marginal_likelihood(m: &GpModel, ys: &[f64]) -> f64 {
    let n = m.len();
    let logdet: f64 = (0..n).map(|i| m.chol_l.as_slice()[i * n + i].ln()).sum();
    -0.5 * dot(ys, &m.alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

impl ResidualEstimator for GpModel {
    fn estimate(&self, input: &[f64]) -> Result<f64, ControlError> {
        if input.len() != self.train_inputs[0].len() {
            return Err(ControlError::DimensionMismatch {
                expected: self.train_inputs[0].len(),
                got: input.len(),
            });
        }
        Ok(gp_predict_mean(self, input))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(matern52(&[0.3, 1.0], &[0.3, 1.0], 2.0, 1.7), 1.7);
        let s5 = 5f64.sqrt();
        let expected = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((matern52(&[0.0], &[1.0], 1.0, 1.0) - expected).abs() < 1e-15);
        let far = matern52(&[0.0], &[100.0], 1.0, 1.0);
        assert!((0.0..1e-90).contains(&far));
    }

    #[test]
    fn single_point_closed_form() {
        let h = GpHyper {
            lengthscale: 1.0,
            signal_var: 2.0,
            noise_var: 0.5,
        };
        let m = gp_fit(&[vec![0.5, 0.5]], &[3.0], h).unwrap();
        let (mean, var) = gp_predict(&m, &[0.5, 0.5]);
        let expected = 3.0 * 2.0 / (2.0 + 0.5 + JITTER);
        assert!((mean - expected).abs() < 1e-12);
        assert!((var - (2.0 - 4.0 / (2.5 + JITTER))).abs() < 1e-12);
    }

    #[test]
    fn prior_far_from_data_and_huge_noise() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0].sin() + 1.0).collect();
        let m = gp_fit(&xs, &ys, GpHyper::default()).unwrap();
        let (mean, var) = gp_predict(&m, &[1e3]);
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);

        let noisy = gp_fit(
            &xs,
            &ys,
            GpHyper {
                noise_var: 1e12,
                ..GpHyper::default()
            },
        )
        .unwrap();
        assert!(gp_predict(&noisy, &[0.5]).0.abs() < 1e-9);
    }

    #[test]
    fn interpolates_with_small_noise() {
        let xs = vec![vec![0.0], vec![0.7], vec![1.5]];
        let ys = [1.0, -2.0, 0.5];
        let m = gp_fit(
            &xs,
            &ys,
            GpHyper {
                noise_var: 1e-10,
                ..GpHyper::default()
            },
        )
        .unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((gp_predict(&m, x).0 - y).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            gp_fit(&[], &[], GpHyper::default()),
            Err(GpError::Empty)
        ));
        assert!(matches!(
            gp_fit(&[vec![1.0]], &[1.0, 2.0], GpHyper::default()),
            Err(GpError::Length { .. })
        ));
        assert!(matches!(
            gp_fit(
                &[vec![1.0]],
                &[1.0],
                GpHyper {
                    noise_var: 0.0,
                    ..GpHyper::default()
                }
            ),
            Err(GpError::Hyper(_))
        ));
    }

    #[test]
    fn grid_search_prefers_likely_lengthscale() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 0.25]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x[0] * 0.5).sin()).collect();
        let m = gp_fit_grid(&xs, &ys, 1e-4, &[0.01, 2.0], &[1.0]).unwrap();
        assert_eq!(m.hyper().lengthscale, 2.0);
    }
}
