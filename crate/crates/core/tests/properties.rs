//! Cross-module invariants: aggregator symmetry laws, outlier resistance,
//! and the Monte Carlo variance-reduction ratio against its closed form.

use std::f64::consts::FRAC_PI_2;

use byzsim_core::aggregators::{aggregate, AggregatorSpec, BlockSummaries};
use byzsim_core::analysis::sigma_k_squared;
use byzsim_core::attacks::AttackSpec;
use byzsim_core::numerics::SeededRng;
use byzsim_core::simulator::{generate_topology, run_mean_estimation, SyntheticSpec};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random block summaries: `blocks` mean vectors of dimension `p` plus a
/// strictly positive per-coordinate scale, all from one deterministic stream.
fn random_blocks(seed: u64, blocks: usize, p: usize, n: usize) -> BlockSummaries {
    let mut rng = SeededRng::new(seed).stream();
    let means = (0..blocks)
        .map(|_| {
            (0..p)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.3 + 0.8 * z
                })
                .collect()
        })
        .collect();
    let sigma_hat = (0..p).map(|_| 0.5 + rng.random::<f64>()).collect();
    BlockSummaries {
        means,
        sigma_hat,
        n,
    }
}

fn all_aggregators() -> Vec<AggregatorSpec> {
    vec![
        AggregatorSpec::Mean,
        AggregatorSpec::Mom,
        AggregatorSpec::vrmom(10).unwrap(),
        AggregatorSpec::TrimmedMean { beta: 0.1 },
    ]
}

/// Every aggregator must commute with the affine map `x ↦ shift + scale·x`
/// (the scale also multiplying the per-coordinate spread estimate), because
/// each is built from order statistics and averages of the block means.
#[test]
fn aggregators_commute_with_affine_reparameterization() {
    let base = random_blocks(0xaff1, 31, 4, 50);
    let scale = 2.5;
    let shift = [-3.7, 0.4, 11.0, -0.002];
    let moved = BlockSummaries {
        means: base
            .means
            .iter()
            .map(|row| {
                row.iter()
                    .zip(shift.iter())
                    .map(|(x, c)| c + scale * x)
                    .collect()
            })
            .collect(),
        sigma_hat: base.sigma_hat.iter().map(|s| scale * s).collect(),
        n: base.n,
    };
    for spec in all_aggregators() {
        let direct = aggregate(&spec, &moved).unwrap();
        let mapped: Vec<f64> = aggregate(&spec, &base)
            .unwrap()
            .iter()
            .zip(shift.iter())
            .map(|(x, c)| c + scale * x)
            .collect();
        for (l, (a, b)) in direct.iter().zip(mapped.iter()).enumerate() {
            let tol = 1e-9 * b.abs().max(1.0);
            assert!(
                (a - b).abs() <= tol,
                "{spec:?} coordinate {l}: {a} vs {b}"
            );
        }
    }
}

/// When the block means sit symmetrically around the median block, the
/// refinement's rank-based correction cancels pair by pair and the refined
/// estimate equals the plain median exactly (bitwise: the summands are
/// small integers, their sum is an exact 0.0).
#[test]
fn refinement_correction_cancels_on_symmetric_configurations() {
    let center = [0.75, -1.25];
    let offsets = [0.009, 0.023, 0.041]; // generic: no rank boundary is hit
    let mut means = vec![center.to_vec()];
    for d in offsets {
        means.push(center.iter().map(|c| c + d).collect());
        means.push(center.iter().map(|c| c - d).collect());
    }
    let blocks = BlockSummaries {
        means,
        sigma_hat: vec![1.0, 1.0],
        n: 100,
    };
    let vrmom = aggregate(&AggregatorSpec::vrmom(10).unwrap(), &blocks).unwrap();
    let mom = aggregate(&AggregatorSpec::Mom, &blocks).unwrap();
    assert_eq!(vrmom, mom);
    assert_eq!(mom, center.to_vec());
}

/// One block reporting ±1e12 must barely move the median-based and trimmed
/// aggregators while dragging the plain mean by roughly 1e12 / #blocks.
#[test]
fn order_statistic_aggregators_shrug_off_one_enormous_block() {
    let clean = random_blocks(0xb16, 41, 3, 80);
    let mut huge = clean.clone();
    huge.means[3] = vec![1e12, -1e12, 1e12];
    for spec in [
        AggregatorSpec::Mom,
        AggregatorSpec::vrmom(10).unwrap(),
        AggregatorSpec::TrimmedMean { beta: 0.1 },
    ] {
        let before = aggregate(&spec, &clean).unwrap();
        let after = aggregate(&spec, &huge).unwrap();
        for (l, (a, b)) in after.iter().zip(before.iter()).enumerate() {
            assert!(
                (a - b).abs() < 0.5,
                "{spec:?} coordinate {l} moved from {b} to {a}"
            );
        }
    }
    let mean_after = aggregate(&AggregatorSpec::Mean, &huge).unwrap();
    assert!(mean_after.iter().all(|x| x.abs() > 1e9));
}

/// Monte Carlo check of the variance-reduction factor: with univariate
/// Gaussian shards (201 blocks of 500 samples, no corruption) the sample
/// variance of `√N·(refined − μ)` must fall strictly below that of
/// `√N·(median − μ)`, with the ratio within 15% of the closed-form value
/// `σ_K²(10) / (π/2)` from the analysis module.
#[test]
fn variance_reduction_matches_the_closed_form_ratio() {
    let spec = SyntheticSpec::location(1);
    let vrmom = AggregatorSpec::vrmom(10).unwrap();
    let mom = AggregatorSpec::Mom;
    let attack = AttackSpec::none();
    let (m, n, reps) = (200usize, 500usize, 2000usize);
    let total = ((m + 1) * n) as f64;
    let master = SeededRng::new(0xeff1_c1e0);

    let mut z_vrmom = Vec::with_capacity(reps);
    let mut z_mom = Vec::with_capacity(reps);
    for r in 0..reps {
        let node = master.child(r as u64);
        let top = generate_topology(&spec, m, n, 0.0, node).unwrap();
        let attack_node = node.child(2); // same data, both aggregators: paired
        let ev = run_mean_estimation(&top, &vrmom, &attack, attack_node).unwrap();
        let em = run_mean_estimation(&top, &mom, &attack, attack_node).unwrap();
        z_vrmom.push(total.sqrt() * (ev[0] - 1.0));
        z_mom.push(total.sqrt() * (em[0] - 1.0));
    }

    let var = |z: &[f64]| {
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64
    };
    let (v_vrmom, v_mom) = (var(&z_vrmom), var(&z_mom));
    assert!(
        v_vrmom < v_mom,
        "refined variance {v_vrmom} not below median variance {v_mom}"
    );
    let ratio = v_vrmom / v_mom;
    let expected = sigma_k_squared(10, 1.0).unwrap() / FRAC_PI_2;
    assert!(
        (ratio / expected - 1.0).abs() < 0.15,
        "variance ratio {ratio} vs closed form {expected}"
    );
}
