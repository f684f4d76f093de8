use super::{spectral_norm, symmetric_eigen, LinalgError, Matrix, RiccatiSolution};

/// Constants of the Lyapunov argument for `V(z) = zᵀPz` under
/// `ż = A_cl z + Bε`.
#[derive(Debug, Clone)]
pub struct StabilityConstants {
    /// `−λ_max(P·A_cl + A_clᵀ·P)`.
    pub lambda: f64,
    /// `λ_min(P)`.
    pub c1: f64,
    /// `λ_max(P)`.
    pub c2: f64,
    /// `2·λ_max(P)·σ(B)`.
    pub c3: f64,
    /// Upper factor `Λ` with `P = ΛᵀΛ`.
    pub lam_chol: Matrix,
    /// Input-increment ratio bound `‖u_k − u_{k−1}‖ ≤ ρ‖z‖`.
    pub rho: f64,
    pub r_x: f64,
    pub r_u: f64,
    /// `σ(K)`, needed for the input-ball radius.
    pub sigma_k: f64,
}

const SIGMA_TOL: f64 = 1e-14;
const SIGMA_MAX_ITER: usize = 100_000;

pub fn stability_constants(
    sol: &RiccatiSolution,
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    rho: f64,
    r_x: f64,
    r_u: f64,
) -> Result<StabilityConstants, LinalgError> {
    let p = &sol.p;
    let a_cl = a.sub(&b.matmul(k)?)?;
    let lyap = p
        .matmul(&a_cl)?
        .add(&a_cl.transpose().matmul(p)?)?
        .symmetrized();
    let lambda = -symmetric_eigen(&lyap)?.max();
    let p_eig = symmetric_eigen(p)?;
    if p_eig.min() <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite);
    }
    let lower = p.cholesky()?;
    let sigma_b = spectral_norm(b, SIGMA_TOL, SIGMA_MAX_ITER)?;
    let sigma_k = spectral_norm(k, SIGMA_TOL, SIGMA_MAX_ITER)?;
    Ok(StabilityConstants {
        lambda,
        c1: p_eig.min(),
        c2: p_eig.max(),
        c3: 2.0 * p_eig.max() * sigma_b,
        lam_chol: lower.transpose(),
        rho,
        r_x,
        r_u,
        sigma_k,
    })
}
