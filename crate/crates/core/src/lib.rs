//! Robust distributed aggregation at desk scale.
//!
//! This crate simulates a star topology of `m` worker machines plus one
//! master, each holding `n` i.i.d. samples.  Up to `⌊α·m⌋` workers are
//! Byzantine and may report arbitrary vectors.  The master combines the
//! `m + 1` reports with a robust aggregator — coordinate-wise median of
//! means (MOM), its variance-reduced refinement (VRMOM), a trimmed mean,
//! or the plain mean — either once (distributed mean estimation) or
//! inside an iterated surrogate-loss learning loop for linear, logistic,
//! and Huber regression.
//!
//! Module map:
//! - [`numerics`]: normal cdf/quantile, selection, dense linear algebra,
//!   seeded RNG streams.
//! - [`aggregators`]: the four aggregation rules over block summaries.
//! - [`models`]: losses, gradients, local ERM, surrogate minimization.
//! - [`attacks`]: Byzantine report corruption strategies.
//! - [`simulator`]: topology synthesis and Monte Carlo drivers.
//! - [`analysis`]: closed-form asymptotic variances and efficiencies.

pub mod aggregators;
pub mod analysis;
pub mod attacks;
pub mod models;
pub mod numerics;
pub mod simulator;
