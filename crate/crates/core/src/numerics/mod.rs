//! Numeric foundations: normal distribution functions, order-statistic
//! selection, small dense linear algebra, and reproducible RNG streams.

mod linalg;
mod normal;
mod rng;
mod select;

pub use linalg::{dot, l2_norm, linf_norm, Matrix};
pub use normal::{normal_cdf, normal_inv_cdf, normal_pdf, FRAC_1_SQRT_2PI};
pub use rng::SeededRng;
pub use select::{median, select_quantile};

/// Errors from the numeric foundations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("probability must lie strictly inside its valid range, got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("input must be non-empty")]
    EmptyInput,
    #[error("NaN encountered at position {0}")]
    NanInput(usize),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at entry ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix is not positive definite: pivot {pivot} evaluated to {value}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}
