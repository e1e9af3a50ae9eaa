//! Dense numerical kernels: matrices, symmetric eigenvalues, the matrix
//! exponential, linear solves and one-dimensional minimization.
//!
//! Everything here is a pure function of its inputs.

mod eigen;
mod expm;
mod linsolve;
mod matrix;
mod scalar_min;

pub use eigen::{max_eigenvalue, min_eigenvalue, spectral_norm, sym_eig, SymEigResult};
pub use expm::expm;
pub use linsolve::{rank, solve_linear, Cholesky, Lu};
pub use matrix::{add, axpy, dot, norm, norm_sq, scaled, sub, Matrix};
pub use scalar_min::golden_min;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("matrix is singular to working precision (pivot {pivot} = {value:e})")]
    Singular { pivot: usize, value: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}
