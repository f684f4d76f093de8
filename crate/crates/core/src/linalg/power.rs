//! Largest singular value by power iteration on `WᵀW`.
//!
//! The Rayleigh quotient `μₖ = ‖W vₖ‖²` of the power iterates increases
//! monotonically towards `σ(W)²`. Convergence is declared once the
//! geometric-tail estimate of the remaining gap, `Δₖ·q/(1-q)` with
//! `q = Δₖ/Δₖ₋₁`, drops below `tol·μₖ`. Plain successive-difference tests
//! stop far too early when the top two singular values are close.

use super::{matrix::dot, LinalgError, Matrix};

/// Final state of a power iteration: the estimate and the right singular
/// vector it converged to (usable as a warm start).
#[derive(Debug, Clone)]
pub struct PowerIterate {
    pub sigma: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Largest singular value of `w` from the all-ones start vector.
pub fn spectral_norm(w: &Matrix, tol: f64, max_iter: usize) -> Result<f64, LinalgError> {
    let start = vec![1.0; w.cols()];
    spectral_norm_from(w, &start, tol, max_iter).map(|it| it.sigma)
}

/// Power iteration from a caller-supplied start vector.
///
/// Falls back to the standard basis vector of the largest column when the
/// start vector lies (numerically) in the null space of `w`. A zero matrix
/// yields `σ = 0`.
pub fn spectral_norm_from(
    w: &Matrix,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<PowerIterate, LinalgError> {
    if start.len() != w.cols() {
        return Err(LinalgError::DimensionMismatch {
            expected: (w.cols(), 1),
            got: (start.len(), 1),
        });
    }
    let fro2 = w.as_slice().iter().map(|v| v * v).sum::<f64>();
    if fro2 == 0.0 {
        return Ok(PowerIterate {
            sigma: 0.0,
            vector: start.to_vec(),
            iterations: 0,
        });
    }

    let mut v = start.to_vec();
    if !normalize(&mut v) {
        v = largest_column_basis(w);
    }
    let mut wv = vec![0.0; w.rows()];
    let mut next = vec![0.0; w.cols()];

    w.matvec_into(&v, &mut wv);
    let mut mu = dot(&wv, &wv);
    if mu <= 1e-28 * fro2 {
        v = largest_column_basis(w);
        w.matvec_into(&v, &mut wv);
        mu = dot(&wv, &wv);
    }
    let mut prev_delta = f64::NAN;
    // the tail estimate must hold on two consecutive iterations, which
    // guards against a transient drop once fast modes have died out
    let mut satisfied = 0;

    for iter in 1..=max_iter {
        w.matvec_transpose_into(&wv, &mut next);
        if !normalize(&mut next) {
            return Ok(PowerIterate {
                sigma: mu.sqrt(),
                vector: v,
                iterations: iter,
            });
        }
        std::mem::swap(&mut v, &mut next);
        w.matvec_into(&v, &mut wv);
        let new_mu = dot(&wv, &wv);
        let delta = new_mu - mu;
        mu = new_mu.max(mu);

        if delta <= 4.0 * f64::EPSILON * mu {
            return Ok(PowerIterate {
                sigma: mu.sqrt(),
                vector: v,
                iterations: iter,
            });
        }
        let mut tail_ok = false;
        if prev_delta.is_finite() && prev_delta > 0.0 {
            let q = delta / prev_delta;
            if q < 1.0 {
                tail_ok = delta * q / (1.0 - q) <= tol * mu;
            }
        }
        satisfied = if tail_ok { satisfied + 1 } else { 0 };
        if satisfied == 2 {
            return Ok(PowerIterate {
                sigma: mu.sqrt(),
                vector: v,
                iterations: iter,
            });
        }
        prev_delta = delta;
    }
    Err(LinalgError::PowerIterationNoConvergence {
        iterations: max_iter,
        last_estimate: mu.sqrt(),
        last_vector: v,
    })
}

/// A fixed number of power steps from `start` with no convergence test.
/// The estimate never exceeds `σ(W)`.
pub fn power_estimate(
    w: &Matrix,
    start: &[f64],
    steps: usize,
) -> Result<PowerIterate, LinalgError> {
    if start.len() != w.cols() {
        return Err(LinalgError::DimensionMismatch {
            expected: (w.cols(), 1),
            got: (start.len(), 1),
        });
    }
    let mut v = start.to_vec();
    if !normalize(&mut v) {
        v = largest_column_basis(w);
    }
    let mut wv = vec![0.0; w.rows()];
    let mut next = vec![0.0; w.cols()];
    w.matvec_into(&v, &mut wv);
    let mut mu = dot(&wv, &wv);
    for _ in 0..steps {
        w.matvec_transpose_into(&wv, &mut next);
        if !normalize(&mut next) {
            break;
        }
        std::mem::swap(&mut v, &mut next);
        w.matvec_into(&v, &mut wv);
        mu = dot(&wv, &wv);
    }
    Ok(PowerIterate {
        sigma: mu.sqrt(),
        vector: v,
        iterations: steps,
    })
}

fn normalize(v: &mut [f64]) -> bool {
    let n = dot(v, v).sqrt();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

fn largest_column_basis(w: &Matrix) -> Vec<f64> {
    let mut norms = vec![0.0; w.cols()];
    for i in 0..w.rows() {
        for (n, x) in norms.iter_mut().zip(w.row_slice(i)) {
            *n += x * x;
        }
    }
    let best = norms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(j, _)| j);
    let mut e = vec![0.0; w.cols()];
    e[best] = 1.0;
    e
}
