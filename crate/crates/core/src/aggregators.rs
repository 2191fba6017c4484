//! Aggregation rules the master applies to the per-block reports.
//!
//! All rules act coordinate-wise on `m + 1` block mean vectors (index 0 is
//! the master's own block). The variance-reduced rule additionally uses a
//! per-coordinate scale estimated from the master's raw block and the
//! per-block sample size `n`: starting from the median of block means it
//! subtracts a rank-based correction whose summands are bounded, so a
//! minority of arbitrary reports moves the result by at most a bounded
//! amount, while on clean data the correction recovers most of the
//! efficiency the median gives up relative to the mean.

use crate::numerics::{
    median, normal_cdf, normal_inv_cdf, normal_pdf, select_quantile, NumericsError,
};

/// Scales below this floor disable the variance-reduction correction for
/// that coordinate (the block median is returned unchanged).
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregatorError {
    #[error("at least one block is required")]
    NoBlocks,
    #[error("block {index} has dimension {got}, expected {expected}")]
    RaggedBlocks {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("scale vector has dimension {got}, expected {expected}")]
    ScaleDimension { got: usize, expected: usize },
    #[error("per-block sample size must be positive")]
    ZeroSampleSize,
    #[error("block count parameter K must be at least 1")]
    InvalidK,
    #[error("trim fraction must lie in [0, 1/2), got {0}")]
    InvalidTrimFraction(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Parameters of the variance-reduced rule: the quantile count `K`, the
/// standard normal quantiles `Δ_k = Φ⁻¹(k/(K+1))`, and the normalizer
/// `Σ_k φ(Δ_k)`, precomputed once.
#[derive(Debug, Clone, PartialEq)]
pub struct VrmomSpec {
    k: usize,
    deltas: Vec<f64>,
    psi_sum: f64,
}

impl VrmomSpec {
    pub fn new(k: usize) -> Result<Self, AggregatorError> {
        if k == 0 {
            return Err(AggregatorError::InvalidK);
        }
        let deltas = (1..=k)
            .map(|i| normal_inv_cdf(i as f64 / (k + 1) as f64))
            .collect::<Result<Vec<_>, _>>()?;
        let psi_sum = deltas.iter().map(|&d| normal_pdf(d)).sum();
        Ok(VrmomSpec { k, deltas, psi_sum })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn psi_sum(&self) -> f64 {
        self.psi_sum
    }
}

/// The aggregation rule the master runs.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregatorSpec {
    Mean,
    Mom,
    Vrmom(VrmomSpec),
    TrimmedMean { beta: f64 },
}

impl AggregatorSpec {
    pub fn vrmom(k: usize) -> Result<Self, AggregatorError> {
        Ok(AggregatorSpec::Vrmom(VrmomSpec::new(k)?))
    }

    pub fn trimmed_mean(beta: f64) -> Result<Self, AggregatorError> {
        if !(0.0..0.5).contains(&beta) {
            return Err(AggregatorError::InvalidTrimFraction(beta));
        }
        Ok(AggregatorSpec::TrimmedMean { beta })
    }

    /// Stable lowercase name used in result tables.
    pub fn name(&self) -> &'static str {
        match self {
            AggregatorSpec::Mean => "mean",
            AggregatorSpec::Mom => "mom",
            AggregatorSpec::Vrmom(_) => "vrmom",
            AggregatorSpec::TrimmedMean { .. } => "trimmed-mean",
        }
    }

    /// The quantile count, for table output; 0 when not applicable.
    pub fn k_for_tables(&self) -> usize {
        match self {
            AggregatorSpec::Vrmom(v) => v.k(),
            _ => 0,
        }
    }
}

/// Everything the master sees in one aggregation round.
#[derive(Debug, Clone)]
pub struct BlockSummaries {
    /// Block mean vectors; index 0 is the master's own (never corrupted).
    pub means: Vec<Vec<f64>>,
    /// Per-coordinate scale from the master's raw block.
    pub sigma_hat: Vec<f64>,
    /// Per-block sample size.
    pub n: usize,
}

impl BlockSummaries {
    /// Validates shape and returns the coordinate dimension.
    fn dim(&self) -> Result<usize, AggregatorError> {
        if self.means.is_empty() {
            return Err(AggregatorError::NoBlocks);
        }
        let p = self.means[0].len();
        for (index, block) in self.means.iter().enumerate() {
            if block.len() != p {
                return Err(AggregatorError::RaggedBlocks {
                    index,
                    got: block.len(),
                    expected: p,
                });
            }
        }
        if self.sigma_hat.len() != p {
            return Err(AggregatorError::ScaleDimension {
                got: self.sigma_hat.len(),
                expected: p,
            });
        }
        if self.n == 0 {
            return Err(AggregatorError::ZeroSampleSize);
        }
        Ok(p)
    }

    fn column(&self, l: usize) -> Vec<f64> {
        self.means.iter().map(|b| b[l]).collect()
    }
}

/// Dispatches to the rule selected by `spec`.
pub fn aggregate(
    spec: &AggregatorSpec,
    blocks: &BlockSummaries,
) -> Result<Vec<f64>, AggregatorError> {
    match spec {
        AggregatorSpec::Mean => mean_aggregate(blocks),
        AggregatorSpec::Mom => mom_aggregate(blocks),
        AggregatorSpec::Vrmom(v) => vrmom_aggregate(blocks, v),
        AggregatorSpec::TrimmedMean { beta } => trimmed_mean_aggregate(blocks, *beta),
    }
}

/// Coordinate-wise arithmetic mean of the block means.
pub fn mean_aggregate(blocks: &BlockSummaries) -> Result<Vec<f64>, AggregatorError> {
    let p = blocks.dim()?;
    let count = blocks.means.len() as f64;
    Ok((0..p)
        .map(|l| blocks.means.iter().map(|b| b[l]).sum::<f64>() / count)
        .collect())
}

/// Coordinate-wise median of the block means (master block included).
pub fn mom_aggregate(blocks: &BlockSummaries) -> Result<Vec<f64>, AggregatorError> {
    let p = blocks.dim()?;
    (0..p)
        .map(|l| median(&blocks.column(l)).map_err(AggregatorError::from))
        .collect()
}

/// Coordinate-wise trimmed mean: `⌊beta * count⌋` blocks are dropped from
/// each tail, the rest averaged.
pub fn trimmed_mean_aggregate(
    blocks: &BlockSummaries,
    beta: f64,
) -> Result<Vec<f64>, AggregatorError> {
    if !(0.0..0.5).contains(&beta) {
        return Err(AggregatorError::InvalidTrimFraction(beta));
    }
    let p = blocks.dim()?;
    let count = blocks.means.len();
    let trim = (beta * count as f64).floor() as usize;
    Ok((0..p)
        .map(|l| {
            let mut col = blocks.column(l);
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let kept = &col[trim..count - trim];
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect())
}

/// One summand of the variance-reduction correction, for a standardized
/// block deviation `z` and quantile count `k`:
/// `K/2 + 1 - ⌈(K+1) * Φ(z)⌉`, with `Φ(z)` clamped away from 0 and 1 so the
/// ceiling stays within `1..=K+1` and the summand within `[-K/2, K/2]` for
/// any input, including attacker-scale values.
pub fn vrmom_correction_summand(z: f64, k: usize) -> f64 {
    let phi = normal_cdf(z).clamp(1e-16, 1.0 - 1e-16);
    let kf = k as f64;
    kf / 2.0 + 1.0 - ((kf + 1.0) * phi).ceil()
}

/// Variance-reduced median of means.
///
/// Per coordinate: take the median `μ̂` of the block means, standardize each
/// block deviation by `σ̂_l / √n`, and subtract
/// `σ̂_l / ((m+1) √n Σφ(Δ_k)) * Σ_j summand_j` from the median. Coordinates
/// whose scale is at or below [`SIGMA_FLOOR`] skip the correction.
pub fn vrmom_aggregate(
    blocks: &BlockSummaries,
    spec: &VrmomSpec,
) -> Result<Vec<f64>, AggregatorError> {
    let p = blocks.dim()?;
    let count = blocks.means.len() as f64;
    let sqrt_n = (blocks.n as f64).sqrt();
    let mut out = Vec::with_capacity(p);
    for l in 0..p {
        let col = blocks.column(l);
        let mu_hat = median(&col)?;
        let sigma = blocks.sigma_hat[l];
        if !(sigma > SIGMA_FLOOR) {
            out.push(mu_hat);
            continue;
        }
        let sum: f64 = col
            .iter()
            .map(|&m| vrmom_correction_summand(sqrt_n * (m - mu_hat) / sigma, spec.k))
            .sum();
        out.push(mu_hat - sigma / (count * sqrt_n * spec.psi_sum) * sum);
    }
    Ok(out)
}

/// Per-coordinate scale of one block from its per-sample vectors, using the
/// population-style `1/n` normalizer:
/// `σ̂_l = sqrt( (1/n) Σ_i (v_{i,l} - mean_l)^2 )`.
pub fn block_sigma_hat(per_sample: &[Vec<f64>]) -> Result<Vec<f64>, AggregatorError> {
    if per_sample.is_empty() {
        return Err(AggregatorError::NoBlocks);
    }
    let p = per_sample[0].len();
    for (index, v) in per_sample.iter().enumerate() {
        if v.len() != p {
            return Err(AggregatorError::RaggedBlocks {
                index,
                got: v.len(),
                expected: p,
            });
        }
    }
    let n = per_sample.len() as f64;
    Ok((0..p)
        .map(|l| {
            let mean = per_sample.iter().map(|v| v[l]).sum::<f64>() / n;
            let ss = per_sample
                .iter()
                .map(|v| (v[l] - mean) * (v[l] - mean))
                .sum::<f64>();
            (ss / n).sqrt()
        })
        .collect())
}

/// Interpolated per-coordinate quantile of the block means; exposed for
/// diagnostics and tests.
pub fn block_quantile(blocks: &BlockSummaries, tau: f64) -> Result<Vec<f64>, AggregatorError> {
    let p = blocks.dim()?;
    (0..p)
        .map(|l| select_quantile(&blocks.column(l), tau).map_err(AggregatorError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summaries(means: Vec<Vec<f64>>, sigma_hat: Vec<f64>, n: usize) -> BlockSummaries {
        BlockSummaries {
            means,
            sigma_hat,
            n,
        }
    }

    #[test]
    fn correction_summand_frozen_values() {
        // z=0 with even K sits exactly on the ceiling boundary and vanishes.
        assert_eq!(vrmom_correction_summand(0.0, 10), 0.0);
        // Odd K at z=0: 1/2 + 1 - ceil(1.0) = 1/2.
        assert_eq!(vrmom_correction_summand(0.0, 1), 0.5);
        // Saturated tails hit the exact bounds ±K/2.
        assert_eq!(vrmom_correction_summand(50.0, 10), -5.0);
        assert_eq!(vrmom_correction_summand(-50.0, 10), 5.0);
        assert_eq!(vrmom_correction_summand(f64::INFINITY, 10), -5.0);
    }

    #[test]
    fn correction_summand_is_bounded_and_nonincreasing() {
        for k in [1usize, 2, 7, 10, 11] {
            let bound = k as f64 / 2.0;
            let mut prev = f64::INFINITY;
            let mut z = -60.0;
            while z <= 60.0 {
                let s = vrmom_correction_summand(z, k);
                assert!(s.abs() <= bound, "k={k} z={z}");
                assert!(s <= prev, "k={k} z={z}");
                prev = s;
                z += 0.25;
            }
        }
    }

    #[test]
    fn vrmom_frozen_hand_value() {
        // K=1, n=1, unit scale, three blocks {-1, 0, 2}: median 0, summands
        // {1/2, 1/2, -1/2}, normalizer φ(0), so the correction equals
        // (1/2) / (3 · φ(0)) = sqrt(2π)/6 and the estimate is its negation.
        let blocks = summaries(vec![vec![-1.0], vec![0.0], vec![2.0]], vec![1.0], 1);
        let spec = VrmomSpec::new(1).unwrap();
        let got = vrmom_aggregate(&blocks, &spec).unwrap();
        let expected = -(2.0 * std::f64::consts::PI).sqrt() / 6.0;
        assert!((got[0] - expected).abs() < 1e-12, "got {}", got[0]);
    }

    #[test]
    fn vrmom_degenerate_scale_returns_the_median() {
        let blocks = summaries(vec![vec![-1.0], vec![0.0], vec![2.0]], vec![0.0], 7);
        let spec = VrmomSpec::new(10).unwrap();
        assert_eq!(vrmom_aggregate(&blocks, &spec).unwrap(), vec![0.0]);
    }

    #[test]
    fn mom_includes_master_and_ignores_order() {
        let a = summaries(vec![vec![10.0], vec![1.0], vec![2.0]], vec![1.0], 4);
        let b = summaries(vec![vec![2.0], vec![10.0], vec![1.0]], vec![1.0], 4);
        assert_eq!(mom_aggregate(&a).unwrap(), vec![2.0]);
        assert_eq!(mom_aggregate(&a).unwrap(), mom_aggregate(&b).unwrap());
    }

    #[test]
    fn even_block_count_median_averages() {
        let blocks = summaries(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![1.0],
            4,
        );
        assert_eq!(mom_aggregate(&blocks).unwrap(), vec![2.5]);
    }

    #[test]
    fn trimmed_mean_drops_floor_beta_count_per_tail() {
        let blocks = summaries(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![100.0]],
            vec![1.0],
            4,
        );
        assert_eq!(trimmed_mean_aggregate(&blocks, 0.2).unwrap(), vec![3.0]);
        // beta = 0 is the plain mean.
        assert_eq!(trimmed_mean_aggregate(&blocks, 0.0).unwrap(), vec![22.0]);
        assert!(matches!(
            trimmed_mean_aggregate(&blocks, 0.5),
            Err(AggregatorError::InvalidTrimFraction(_))
        ));
    }

    #[test]
    fn mean_aggregate_matches_arithmetic_mean() {
        let blocks = summaries(vec![vec![1.0, 10.0], vec![3.0, 20.0]], vec![1.0, 1.0], 2);
        assert_eq!(mean_aggregate(&blocks).unwrap(), vec![2.0, 15.0]);
    }

    #[test]
    fn block_sigma_hat_uses_population_normalizer() {
        let sigma = block_sigma_hat(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert!((sigma[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        // Constant block has zero scale.
        let zero = block_sigma_hat(&[vec![5.0, 1.0], vec![5.0, 1.0]]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let ragged = summaries(vec![vec![1.0, 2.0], vec![3.0]], vec![1.0, 1.0], 4);
        assert!(matches!(
            mom_aggregate(&ragged),
            Err(AggregatorError::RaggedBlocks { index: 1, .. })
        ));
        let empty = summaries(vec![], vec![], 4);
        assert!(matches!(
            mean_aggregate(&empty),
            Err(AggregatorError::NoBlocks)
        ));
        let bad_scale = summaries(vec![vec![1.0]], vec![], 4);
        assert!(matches!(
            vrmom_aggregate(&bad_scale, &VrmomSpec::new(2).unwrap()),
            Err(AggregatorError::ScaleDimension { .. })
        ));
        let zero_n = summaries(vec![vec![1.0]], vec![1.0], 0);
        assert!(matches!(
            mom_aggregate(&zero_n),
            Err(AggregatorError::ZeroSampleSize)
        ));
        assert!(matches!(
            VrmomSpec::new(0),
            Err(AggregatorError::InvalidK)
        ));
    }

    #[test]
    fn vrmom_correction_magnitude_is_bounded_on_centered_data() {
        // With the median subtracted first, roughly half the summands are
        // non-positive, keeping the net correction within (K/2)·σ̂/√n.
        use rand::prelude::*;
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let spec = VrmomSpec::new(10).unwrap();
        for _ in 0..200 {
            let n = 25usize;
            let means: Vec<Vec<f64>> = (0..31)
                .map(|_| vec![rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt()])
                .collect();
            let blocks = summaries(means, vec![1.0], n);
            let vr = vrmom_aggregate(&blocks, &spec).unwrap()[0];
            let md = mom_aggregate(&blocks).unwrap()[0];
            let bound = (spec.k() as f64 / 2.0) * 1.0 / (n as f64).sqrt();
            assert!((vr - md).abs() <= bound, "correction {} > {}", vr - md, bound);
        }
    }
}
