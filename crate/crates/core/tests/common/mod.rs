//! Independent oracles shared by the integration tests. Nothing here calls
//! back into the numerics it is used to check.

#![allow(dead_code)]

use friday_core::linalg::Matrix;
use friday_core::mlp::MlpNetwork;
use friday_core::plant::{EnviroParams, SimState, TruthKind};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Singular values by one-sided Jacobi rotations on the columns, sorted
/// descending.
pub fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    // work on the taller orientation so columns are the short side
    let (rows, cols, mut a) = if m.rows() >= m.cols() {
        (m.rows(), m.cols(), m.as_slice().to_vec())
    } else {
        let t = m.transpose();
        (t.rows(), t.cols(), t.as_slice().to_vec())
    };
    let at = |a: &Vec<f64>, i: usize, j: usize| a[i * cols + j];
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (x, y) = (at(&a, i, p), at(&a, i, q));
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (at(&a, i, p), at(&a, i, q));
                    a[i * cols + p] = c * x - s * y;
                    a[i * cols + q] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| at(&a, i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Network output as a plain function of its input, computed layer by
/// layer from the raw weights.
pub fn reference_forward(net: &MlpNetwork, x: &[f64]) -> Vec<f64> {
    let ws = net.weights();
    let mut h = x.to_vec();
    for (l, w) in ws.iter().enumerate() {
        let mut out = vec![0.0; w.rows()];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..w.cols()).map(|c| w[(r, c)] * h[c]).sum();
        }
        if l + 1 < ws.len() {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        h = out;
    }
    h
}

pub fn mse(net: &MlpNetwork, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| {
            reference_forward(net, x)
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / xs.len() as f64
}

/// Central finite-difference gradient of the batch MSE for one weight.
pub fn fd_gradient(
    net: &MlpNetwork,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    layer: usize,
    r: usize,
    c: usize,
    h: f64,
) -> f64 {
    let mut plus = net.clone();
    plus.weights_mut()[layer][(r, c)] += h;
    let mut minus = net.clone();
    minus.weights_mut()[layer][(r, c)] -= h;
    (mse(&plus, xs, ys) - mse(&minus, xs, ys)) / (2.0 * h)
}

/// Smallest |pre-activation| over all hidden units for input `x`.
pub fn min_preactivation(net: &MlpNetwork, x: &[f64]) -> f64 {
    let ws = net.weights();
    let mut h = x.to_vec();
    let mut smallest = f64::INFINITY;
    for w in &ws[..ws.len() - 1] {
        let mut out = vec![0.0; w.rows()];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..w.cols()).map(|c| w[(r, c)] * h[c]).sum();
            smallest = smallest.min(o.abs());
        }
        out.iter_mut().for_each(|v| *v = v.max(0.0));
        h = out;
    }
    smallest
}

/// Matern-5/2 written out directly.
pub fn matern(x: &[f64], y: &[f64], ell: f64, sv: f64) -> f64 {
    let d = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let r = 5f64.sqrt() * d / ell;
    sv * (1.0 + r + r * r / 3.0) * (-r).exp()
}

/// GP posterior mean via a dense LU solve of `(K + σ²I)α = y`.
pub fn dense_gp_mean(
    xs: &[Vec<f64>],
    ys: &[f64],
    ell: f64,
    sv: f64,
    noise: f64,
    jitter: f64,
    x: &[f64],
) -> f64 {
    let n = xs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern(&xs[i], &xs[j], ell, sv) + if i == j { noise + jitter } else { 0.0 }
    });
    let y = nalgebra::DVector::from_column_slice(ys);
    let alpha = k.lu().solve(&y).expect("nonsingular");
    (0..n).map(|i| matern(x, &xs[i], ell, sv) * alpha[i]).sum()
}

/// Residual force `m·p̈ − u` written from the model equations, term by
/// term.
pub fn closed_form_residual(kind: &TruthKind, mass: f64, s: &SimState, u: f64) -> f64 {
    let (p, v, t) = (s.p, s.pdot, s.t);
    match *kind {
        TruthKind::NominalOnly => 0.0,
        TruthKind::ParamTruth { a_load, period } => {
            // m(t)·p̈ = λ(t)·u  ⇒  m·p̈ − u = u·(m·λ/m(t) − 1)
            let lam = (-t / period).exp();
            let m_t = mass + a_load * mass * (1.0 - lam);
            u * (mass * lam / m_t - 1.0)
        }
        TruthKind::MultiTruth => v * v * u + p * p + v * u.abs(),
        TruthKind::EnviroTruth(EnviroParams {
            mu_icy,
            c_air,
            r1,
            r2,
            a_roll,
            k1,
            k2,
            g,
        }) => {
            let f_air = c_air * v * v * v.sin();
            let sgn = if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
            let f_roll = -sgn * mass * g * (r1 * (1.0 - (-a_roll * v.abs()).exp()) + r2 * v.abs());
            let f_duff = k1 * p + k2 * p.powi(3);
            mu_icy * u - f_air - f_roll - f_duff - u
        }
    }
}

/// Largest real part of the eigenvalues of `m`.
pub fn max_real_eig(m: &Matrix) -> f64 {
    to_dmatrix(m)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `σ_min/σ_max` of `[B, AB, …, Aⁿ⁻¹B]` from nalgebra's SVD.
pub fn controllability_ratio(a: &Matrix, b: &Matrix) -> f64 {
    let (a, b) = (to_dmatrix(a), to_dmatrix(b));
    let n = a.nrows();
    let mut blocks = Vec::new();
    let mut cur = b.clone();
    for _ in 0..n {
        blocks.push(cur.clone());
        cur = &a * cur;
    }
    let c = DMatrix::from_fn(n, n * b.ncols(), |i, j| {
        blocks[j / b.ncols()][(i, j % b.ncols())]
    });
    let sv = c.singular_values();
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|x, y| y.total_cmp(x));
    sorted[n - 1] / sorted[0]
}

pub fn controllable(a: &Matrix, b: &Matrix) -> bool {
    controllability_ratio(a, b) > 1e-8
}

/// `‖AᵀP‖ + ‖PA‖ + ‖PBR⁻¹BᵀP‖ + ‖Q‖` (Frobenius): the magnitude of the
/// terms whose cancellation the Riccati residual measures. Round-off in
/// evaluating the residual is about `ε` times this.
pub fn care_term_scale(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> f64 {
    let (a, b, q, r, p) = (
        to_dmatrix(a),
        to_dmatrix(b),
        to_dmatrix(q),
        to_dmatrix(r),
        to_dmatrix(p),
    );
    let rinv = r.try_inverse().unwrap();
    (a.transpose() * &p).norm()
        + (&p * &a).norm()
        + (&p * &b * rinv * b.transpose() * &p).norm()
        + q.norm()
}
