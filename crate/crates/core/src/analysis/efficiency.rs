//! Limiting variance of the quantile-corrected estimator and the derived
//! efficiency constants.

use super::AnalysisError;
use crate::aggregators::VrmomSpec;
use std::f64::consts::PI;

/// Asymptotic efficiency of the plain median of block means.
pub const MOM_EFFICIENCY: f64 = 2.0 / PI;

/// Efficiency the corrected estimator approaches as the quantile count
/// grows without bound.
pub const VRMOM_LIMIT_EFFICIENCY: f64 = 3.0 / PI;

/// Limiting variance of the corrected estimator at quantile count `k`, for
/// data of variance `sigma_sq`: a double sum over the quantile grid
/// `tau_j = j/(k+1)`, normalized by the squared density mass at the grid.
///
/// Evaluated as the literal O(k²) sum.
pub fn sigma_k_squared(k: usize, sigma_sq: f64) -> Result<f64, AnalysisError> {
    if !sigma_sq.is_finite() || sigma_sq <= 0.0 {
        return Err(AnalysisError::InvalidVariance(sigma_sq));
    }
    let spec = VrmomSpec::new(k).map_err(|_| AnalysisError::InvalidK(k))?;
    let kp1 = (k + 1) as f64;
    let taus: Vec<f64> = (1..=k).map(|j| j as f64 / kp1).collect();
    let mut num = 0.0;
    for &t1 in &taus {
        for &t2 in &taus {
            num += t1.min(t2) * (1.0 - t1.max(t2));
        }
    }
    let s_psi = spec.psi_sum();
    Ok(num / (s_psi * s_psi) * sigma_sq)
}

/// Efficiency summary for one quantile count (unit variance).
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub k: usize,
    /// Limiting variance ratio of the corrected estimator to the sample mean.
    pub sigma_k_sq_over_sigma_sq: f64,
    /// Relative efficiency, the reciprocal of the variance ratio.
    pub efficiency: f64,
    /// Reference efficiency of the uncorrected median of block means.
    pub mom_efficiency: f64,
}

impl EfficiencyReport {
    pub fn for_k(k: usize) -> Result<Self, AnalysisError> {
        let ratio = sigma_k_squared(k, 1.0)?;
        Ok(EfficiencyReport {
            k,
            sigma_k_sq_over_sigma_sq: ratio,
            efficiency: 1.0 / ratio,
            mom_efficiency: MOM_EFFICIENCY,
        })
    }
}
