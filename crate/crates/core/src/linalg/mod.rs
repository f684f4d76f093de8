//! Small dense numerics: matrices, symmetric eigen-solves, power-iteration
//! spectral norms, the continuous algebraic Riccati equation and the
//! constants that feed the closed-loop error-ball bound.

mod eigen;
mod matrix;
mod power;
mod riccati;
mod stability;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::{dot, norm2, Matrix};
pub use power::{power_estimate, spectral_norm, spectral_norm_from, PowerIterate};
pub use riccati::{
    controllability_matrix, initial_stabilizing_gain, is_controllable, is_hurwitz, lqr_gain,
    solve_care, solve_lyapunov, RiccatiSolution,
};
pub use stability::{stability_constants, StabilityConstants};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("data length mismatch: expected {expected}, got {got}")]
    InvalidData { expected: usize, got: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    PowerIterationNoConvergence {
        iterations: usize,
        last_estimate: f64,
        last_vector: Vec<f64>,
    },
    #[error("Jacobi eigen-solve did not converge (off-diagonal norm {off_diagonal:e})")]
    EigenNoConvergence { off_diagonal: f64 },
    #[error("(A, B) is not controllable")]
    Uncontrollable,
    #[error("no stabilizing initial gain found")]
    NoStabilizingGain,
    #[error("Riccati iteration did not converge (residual {residual:e})")]
    RiccatiNoConvergence { residual: f64 },
}
