//! Continuous algebraic Riccati equation by Newton–Kleinman iteration.
//!
//! Each Newton step solves a Lyapunov equation through its vectorized
//! Kronecker form. That is O(n⁶) but the state dimension here is at most
//! four, so the direct solve costs nothing and needs no Schur machinery.

use super::{symmetric_eigen, LinalgError, Matrix};

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: Matrix,
    /// `K = R⁻¹BᵀP`.
    pub gain_k: Matrix,
    /// Frobenius norm of the equation residual at `p`.
    pub residual_norm: f64,
}

const MAX_NEWTON_STEPS: usize = 200;

/// Solves `AᵀX + XA = −C` for `X`.
pub fn solve_lyapunov(a: &Matrix, c: &Matrix) -> Result<Matrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if c.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch {
            expected: (n, n),
            got: c.shape(),
        });
    }
    // Row-major vec: vec(AᵀX) = (Aᵀ ⊗ I) vec(X), vec(XA) = (I ⊗ Aᵀ) vec(X).
    let at = a.transpose();
    let id = Matrix::identity(n);
    let op = at.kron(&id).add(&id.kron(&at))?;
    let rhs = Matrix::column(&c.scale(-1.0).into_vec());
    let x = op.solve(&rhs)?;
    Ok(Matrix::new(n, n, x.into_vec())?.symmetrized())
}

/// `true` when every eigenvalue of `a` has negative real part.
///
/// Lyapunov test: `a` is Hurwitz iff `aᵀX + Xa = −I` has a (unique)
/// positive-definite solution.
pub fn is_hurwitz(a: &Matrix) -> bool {
    if !a.is_square() || !a.is_finite() {
        return false;
    }
    match solve_lyapunov(a, &Matrix::identity(a.rows())) {
        Ok(x) => x.is_finite() && x.cholesky().is_ok(),
        Err(_) => false,
    }
}

/// `[B, AB, …, Aⁿ⁻¹B]`.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: (n, b.cols()),
            got: b.shape(),
        });
    }
    let m = b.cols();
    let mut out = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..m {
                out[(i, k * m + j)] = block[(i, j)];
            }
        }
        block = a.matmul(&block)?;
    }
    Ok(out)
}

/// Kalman rank test: the controllability Gramian-like product `CCᵀ` must
/// have its smallest eigenvalue above `1e-10` of its largest.
pub fn is_controllable(a: &Matrix, b: &Matrix) -> Result<bool, LinalgError> {
    let c = controllability_matrix(a, b)?;
    let cct = c.matmul(&c.transpose())?;
    let eig = symmetric_eigen(&cct)?;
    Ok(eig.max() > 0.0 && eig.min() > 1e-10 * eig.max())
}

/// Finds `K₀` with `A − BK₀` Hurwitz.
///
/// Tries `K₀ = 0`, then `K₀ = αBᵀ` for `α ∈ {1, 10, 100}`, then falls back
/// to pole shifting: with `β` above the spectral abscissa of `A` (bounded by
/// `‖A‖_F + 1`), solve `(A+βI)Z + Z(A+βI)ᵀ = 2BBᵀ` and take `K₀ = BᵀZ⁻¹`,
/// which places the closed-loop spectrum left of `−β`.
pub fn initial_stabilizing_gain(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    let (n, m) = (a.rows(), b.cols());
    let closed = |k: &Matrix| -> Result<Matrix, LinalgError> { a.sub(&b.matmul(k)?) };

    let zero = Matrix::zeros(m, n);
    if is_hurwitz(a) {
        return Ok(zero);
    }
    let bt = b.transpose();
    for alpha in [1.0, 10.0, 100.0] {
        let k = bt.scale(alpha);
        if is_hurwitz(&closed(&k)?) {
            return Ok(k);
        }
    }

    let beta = a.frobenius_norm() + 1.0;
    let shifted = a.add(&Matrix::identity(n).scale(beta))?;
    // solve_lyapunov(M, C) solves MᵀX + XM = −C; here M = −(A+βI)ᵀ.
    let bbt = b.matmul(&bt)?;
    let z = solve_lyapunov(&shifted.transpose().scale(-1.0), &bbt.scale(2.0))?;
    let k = bt.matmul(&z.inverse()?)?;
    if is_hurwitz(&closed(&k)?) {
        Ok(k)
    } else {
        Err(LinalgError::NoStabilizingGain)
    }
}

fn care_residual(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r_inv: &Matrix,
    p: &Matrix,
) -> Result<f64, LinalgError> {
    let pb = p.matmul(b)?;
    let quad = pb.matmul(r_inv)?.matmul(&pb.transpose())?;
    let res = a
        .transpose()
        .matmul(p)?
        .add(&p.matmul(a)?)?
        .sub(&quad)?
        .add(q)?;
    Ok(res.frobenius_norm())
}

/// Solves the CARE for the stabilizing `P` and the LQR gain.
pub fn solve_care(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    tol: f64,
) -> Result<RiccatiSolution, LinalgError> {
    let n = a.rows();
    let m = b.cols();
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: (n, m),
            got: b.shape(),
        });
    }
    if q.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch {
            expected: (n, n),
            got: q.shape(),
        });
    }
    if r.shape() != (m, m) {
        return Err(LinalgError::DimensionMismatch {
            expected: (m, m),
            got: r.shape(),
        });
    }
    for sym in [q, r] {
        let asym = sym.asymmetry();
        if asym > 1e-12 * sym.max_abs().max(1.0) {
            return Err(LinalgError::NotSymmetric(asym));
        }
    }
    r.cholesky()?;
    if !is_controllable(a, b)? {
        return Err(LinalgError::Uncontrollable);
    }

    let r_inv = r.inverse()?.symmetrized();
    let bt = b.transpose();
    let mut k = initial_stabilizing_gain(a, b)?;
    let mut best: Option<(f64, Matrix)> = None;
    let mut stalled = 0;

    for _ in 0..MAX_NEWTON_STEPS {
        let a_cl = a.sub(&b.matmul(&k)?)?;
        let c = q.add(&k.transpose().matmul(r)?.matmul(&k)?)?;
        let p = solve_lyapunov(&a_cl, &c)?;
        k = r_inv.matmul(&bt)?.matmul(&p)?;
        let residual = care_residual(a, b, q, &r_inv, &p)?;
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return finish(a, b, p, k, residual);
        }
        match &best {
            Some((best_res, _)) if residual >= 0.5 * *best_res => {
                // quadratic convergence has hit the round-off floor
                stalled += 1;
                if residual < *best_res {
                    best = Some((residual, p));
                }
                if stalled >= 5 {
                    break;
                }
            }
            _ => {
                stalled = 0;
                best = Some((residual, p));
            }
        }
    }
    Err(LinalgError::RiccatiNoConvergence {
        residual: best.map_or(f64::INFINITY, |(r, _)| r),
    })
}

fn finish(
    a: &Matrix,
    b: &Matrix,
    p: Matrix,
    k: Matrix,
    residual: f64,
) -> Result<RiccatiSolution, LinalgError> {
    let a_cl = a.sub(&b.matmul(&k)?)?;
    if !is_hurwitz(&a_cl) {
        return Err(LinalgError::NoStabilizingGain);
    }
    Ok(RiccatiSolution {
        p,
        gain_k: k,
        residual_norm: residual,
    })
}

/// `K = R⁻¹BᵀP`.
pub fn lqr_gain(sol: &RiccatiSolution, b: &Matrix, r: &Matrix) -> Result<Matrix, LinalgError> {
    r.inverse()?.matmul(&b.transpose())?.matmul(&sol.p)
}
