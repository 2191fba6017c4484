//! Byzantine corruption strategies.
//!
//! A fixed subset of workers (never the master, index 0) is Byzantine for
//! the whole run. Report-level attacks rewrite the vector a worker sends;
//! the label-flip attack instead rewrites the worker's shard before the
//! honest computation, so it is applied via [`label_flip_shard`] rather
//! than [`corrupt_report`].

use crate::models::DataShard;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttackError {
    #[error("byzantine fraction must lie in [0, 1/2), got {0}")]
    InvalidAlpha(f64),
    #[error("attack scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("the label-flip attack rewrites shards, not reports")]
    ShardLevelAttack,
    #[error("label-flip requires binary labels, found {value} at row {row}")]
    NonBinaryLabel { value: f64, row: usize },
    #[error("label-flip requires a labeled shard")]
    UnlabeledShard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    GaussianNoise,
    Omniscient,
    BitFlip,
    LabelFlip,
}

/// An attack family plus its scale knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Per-coordinate standard deviation of Gaussian payloads.
    pub gaussian_std: f64,
    /// The omniscient payload is `-scale * honest`.
    pub omniscient_scale: f64,
    /// Number of leading coordinates the bit-flip attack negates.
    pub bitflip_coords: usize,
}

/// Per-coordinate variance 200 for Gaussian payloads.
pub const DEFAULT_GAUSSIAN_VARIANCE: f64 = 200.0;
pub const DEFAULT_OMNISCIENT_SCALE: f64 = 1e10;
pub const DEFAULT_BITFLIP_COORDS: usize = 5;

impl AttackSpec {
    fn with_kind(kind: AttackKind) -> Self {
        AttackSpec {
            kind,
            gaussian_std: DEFAULT_GAUSSIAN_VARIANCE.sqrt(),
            omniscient_scale: DEFAULT_OMNISCIENT_SCALE,
            bitflip_coords: DEFAULT_BITFLIP_COORDS,
        }
    }

    pub fn none() -> Self {
        Self::with_kind(AttackKind::None)
    }

    pub fn gaussian_noise() -> Self {
        Self::with_kind(AttackKind::GaussianNoise)
    }

    pub fn omniscient() -> Self {
        Self::with_kind(AttackKind::Omniscient)
    }

    pub fn bit_flip() -> Self {
        Self::with_kind(AttackKind::BitFlip)
    }

    pub fn label_flip() -> Self {
        Self::with_kind(AttackKind::LabelFlip)
    }

    pub fn with_gaussian_std(mut self, std: f64) -> Result<Self, AttackError> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(AttackError::InvalidScale(std));
        }
        self.gaussian_std = std;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            AttackKind::None => "none",
            AttackKind::GaussianNoise => "gaussian",
            AttackKind::Omniscient => "omniscient",
            AttackKind::BitFlip => "bitflip",
            AttackKind::LabelFlip => "labelflip",
        }
    }
}

impl std::str::FromStr for AttackKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(AttackKind::None),
            "gaussian" => Ok(AttackKind::GaussianNoise),
            "omniscient" => Ok(AttackKind::Omniscient),
            "bitflip" => Ok(AttackKind::BitFlip),
            "labelflip" => Ok(AttackKind::LabelFlip),
            other => Err(format!(
                "unknown attack '{other}' (expected none|gaussian|omniscient|bitflip|labelflip)"
            )),
        }
    }
}

/// The worker indices that are Byzantine (a subset of `1..=m`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByzantineSet {
    indices: Vec<usize>,
}

impl ByzantineSet {
    pub fn empty() -> Self {
        ByzantineSet {
            indices: Vec::new(),
        }
    }

    pub fn contains(&self, worker: usize) -> bool {
        self.indices.binary_search(&worker).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Samples `⌊alpha * m⌋` distinct Byzantine workers uniformly from `1..=m`.
/// The master (index 0) is never Byzantine.
pub fn sample_byzantine_set(
    m: usize,
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<ByzantineSet, AttackError> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(AttackError::InvalidAlpha(alpha));
    }
    let count = (alpha * m as f64).floor() as usize;
    let mut indices: Vec<usize> = rand::seq::index::sample(rng, m, count)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    indices.sort_unstable();
    Ok(ByzantineSet { indices })
}

/// Produces the vector a Byzantine worker reports in place of `honest`.
///
/// `GaussianNoise` draws a fresh payload from the stream on every call;
/// `Omniscient` and `BitFlip` are deterministic transforms of the honest
/// report; `None` passes it through. `LabelFlip` is shard-level and is
/// rejected here.
pub fn corrupt_report(
    honest: &[f64],
    spec: &AttackSpec,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, AttackError> {
    match spec.kind {
        AttackKind::None => Ok(honest.to_vec()),
        AttackKind::GaussianNoise => Ok(honest
            .iter()
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                spec.gaussian_std * z
            })
            .collect()),
        AttackKind::Omniscient => Ok(honest.iter().map(|v| -spec.omniscient_scale * v).collect()),
        AttackKind::BitFlip => {
            let mut out = honest.to_vec();
            for v in out.iter_mut().take(spec.bitflip_coords) {
                *v = -*v;
            }
            Ok(out)
        }
        AttackKind::LabelFlip => Err(AttackError::ShardLevelAttack),
    }
}

/// Returns the shard with labels `y ↦ 1 - y`; covariates are untouched.
pub fn label_flip_shard(shard: &DataShard) -> Result<DataShard, AttackError> {
    if shard.y().len() != shard.n() {
        return Err(AttackError::UnlabeledShard);
    }
    let flipped: Vec<f64> = shard
        .y()
        .iter()
        .enumerate()
        .map(|(row, &v)| {
            if v == 0.0 || v == 1.0 {
                Ok(1.0 - v)
            } else {
                Err(AttackError::NonBinaryLabel { value: v, row })
            }
        })
        .collect::<Result<_, _>>()?;
    shard
        .with_labels(flipped)
        .map_err(|_| AttackError::UnlabeledShard)
}
