//! Random streams and the small dense linear-algebra kernels shared by every
//! other module. All matrices in this crate are tiny (N ≤ 16), so everything
//! here is plain row-major `Vec<f64>` code without blocking or BLAS.

mod eigen;
mod expm;
mod matrix;
mod quadrature;
mod rng;

pub use eigen::{eigenvalues, ComplexSpectrum};
pub use expm::matrix_exp;
pub use matrix::{symmetric_eigen, Matrix, SymmetricEigen};
pub use quadrature::{quadrature, quadrature_with_limit};
pub use rng::RngStream;
pub(crate) use rng::check_probability_row;

use thiserror::Error;

/// Failures of the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("eigenvalue iteration did not converge within {0} sweeps")]
    IterationLimitExceeded(usize),
    #[error("scaled matrix norm {0:e} is too large for the exponential")]
    NormOverflow(f64),
    #[error("adaptive quadrature exceeded {0} subdivisions")]
    SubdivisionLimit(usize),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, not 1")]
    UnnormalizedWeights(f64),
}
