//! Closed-form and quadrature evaluation of the aggregators' asymptotic
//! behavior: the corrected estimator's limiting variance as a function of
//! the quantile count, efficiency constants, limiting covariance entries
//! for correlated coordinates, and the off-diagonal gap curve `h`.

mod bvn;
mod covariance;
mod efficiency;

pub use bvn::bivariate_normal_cdf;
pub use covariance::{
    c_limit_entry, c_matrix_entry, c_mom_entry, h_phi, CovEntryInputs, QuadratureOutcome,
};
pub use efficiency::{
    sigma_k_squared, EfficiencyReport, MOM_EFFICIENCY, VRMOM_LIMIT_EFFICIENCY,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("quantile count must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("variance must be positive and finite, got {0}")]
    InvalidVariance(f64),
    #[error("correlation must lie in [-1, 1], got {0}")]
    CorrelationOutOfRange(f64),
    #[error("argument must not be NaN")]
    NanArgument,
    #[error("angle must lie in [-pi/2, pi/2], got {0}")]
    AngleOutOfRange(f64),
    #[error("quadrature stalled at tolerance {achieved:e} (target {tolerance:e})")]
    QuadratureDidNotConverge { achieved: f64, tolerance: f64 },
}
