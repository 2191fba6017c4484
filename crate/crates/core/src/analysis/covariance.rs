//! Limiting covariance entries of the corrected and uncorrected
//! block-median aggregators for a correlated coordinate pair, and the
//! off-diagonal gap curve `h`.

use super::bvn::{bivariate_normal_cdf, RHO_DEGENERATE};
use super::AnalysisError;
use crate::aggregators::VrmomSpec;
use crate::numerics::normal_pdf;
use std::f64::consts::{FRAC_PI_2, PI};

/// Inputs for one limiting covariance entry of the corrected aggregator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovEntryInputs {
    /// Correlation between the two coordinates.
    pub rho: f64,
    /// The two coordinates' variances.
    pub variances: (f64, f64),
    /// Quantile count.
    pub k: usize,
}

fn check_rho(rho: f64) -> Result<(), AnalysisError> {
    if !(rho.abs() <= 1.0) {
        return Err(AnalysisError::CorrelationOutOfRange(rho));
    }
    Ok(())
}

fn scale(variances: (f64, f64)) -> Result<f64, AnalysisError> {
    for v in [variances.0, variances.1] {
        if !v.is_finite() || v <= 0.0 {
            return Err(AnalysisError::InvalidVariance(v));
        }
    }
    Ok((variances.0 * variances.1).sqrt())
}

/// Covariance entry of the corrected aggregator at finite quantile count:
/// a double sum of joint-orthant probabilities at the quantile grid,
/// centered and normalized by the squared density mass.
pub fn c_matrix_entry(inputs: &CovEntryInputs) -> Result<f64, AnalysisError> {
    check_rho(inputs.rho)?;
    let scale = scale(inputs.variances)?;
    let spec = VrmomSpec::new(inputs.k).map_err(|_| AnalysisError::InvalidK(inputs.k))?;
    let kp1 = (inputs.k + 1) as f64;
    let deltas = spec.deltas();
    let mut sum = 0.0;
    for (i, &d1) in deltas.iter().enumerate() {
        let t1 = (i + 1) as f64 / kp1;
        for (j, &d2) in deltas.iter().enumerate() {
            let t2 = (j + 1) as f64 / kp1;
            sum += bivariate_normal_cdf(d1, d2, inputs.rho)? - t1 * t2;
        }
    }
    Ok(sum / (spec.psi_sum() * spec.psi_sum()) * scale)
}

/// Covariance entry of the plain block-median aggregator: determined by
/// the joint orthant probability at the origin.
pub fn c_mom_entry(rho: f64, variances: (f64, f64)) -> Result<f64, AnalysisError> {
    check_rho(rho)?;
    let scale = scale(variances)?;
    let origin = bivariate_normal_cdf(0.0, 0.0, rho)?;
    Ok((2.0 * PI * origin - FRAC_PI_2) * scale)
}

/// Result of an adaptive quadrature, with the error estimate it settled at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOutcome {
    pub value: f64,
    pub achieved_tolerance: f64,
}

/// Absolute error target for [`c_limit_entry`].
const C_LIMIT_TOL: f64 = 1e-5;
/// Plane truncation: beyond this radius the Gaussian weight is < 1e-15.
const C_LIMIT_RANGE: f64 = 8.0;
const C_LIMIT_MAX_DEPTH: u32 = 24;

/// Large-quantile-count limit of the corrected aggregator's covariance
/// entry at unit variances: `4π ∬ ψ(y₁)ψ(y₂) F(y₁,y₂) dy₁dy₂ − π` over the
/// truncated plane, with `F` the joint CDF, by adaptive panel subdivision.
pub fn c_limit_entry(rho: f64) -> Result<QuadratureOutcome, AnalysisError> {
    check_rho(rho)?;
    if rho.abs() >= RHO_DEGENERATE {
        // Perfect dependence has an exact value: mapping both coordinates
        // through their own CDFs gives uniform variables U (and V = U or
        // 1 − U), so the integral is E[min(U, V)] — an order-statistics
        // moment equal to 1/3 (comonotone) or the tail moment
        // E[max(0, 2U − 1)]·(1/2) pattern giving 1/6 (antithetic).
        let value = if rho > 0.0 { PI / 3.0 } else { -PI / 3.0 };
        return Ok(QuadratureOutcome {
            value,
            achieved_tolerance: 0.0,
        });
    }
    let f = |y1: f64, y2: f64| {
        normal_pdf(y1)
            * normal_pdf(y2)
            * bivariate_normal_cdf(y1, y2, rho).expect("inputs validated")
    };
    let raw_tol = C_LIMIT_TOL / (4.0 * PI);
    let (integral, achieved_raw, converged) = adaptive_panels(&f, C_LIMIT_RANGE, raw_tol);
    let achieved_tolerance = 4.0 * PI * achieved_raw;
    if !converged {
        return Err(AnalysisError::QuadratureDidNotConverge {
            achieved: achieved_tolerance,
            tolerance: C_LIMIT_TOL,
        });
    }
    Ok(QuadratureOutcome {
        value: 4.0 * PI * integral - PI,
        achieved_tolerance,
    })
}

/// Off-diagonal covariance gap between the uncorrected and corrected
/// aggregators at unit variances, as a function of the correlation angle.
pub fn h_phi(phi: f64) -> Result<f64, AnalysisError> {
    if !(phi.abs() <= FRAC_PI_2 + 1e-12) {
        return Err(AnalysisError::AngleOutOfRange(phi));
    }
    let rho = phi.sin().clamp(-1.0, 1.0);
    let mom = c_mom_entry(rho, (1.0, 1.0))?;
    let limit = c_limit_entry(rho)?;
    Ok((mom - limit.value) / PI)
}

/// 4-point Gauss-Legendre nodes and weights on [-1, 1].
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_26,
    0.339_981_043_584_856_26,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_85,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    budget: f64,
    depth: u32,
}

fn gl_panel(f: &impl Fn(f64, f64) -> f64, p: &Panel) -> f64 {
    let hx = 0.5 * (p.x1 - p.x0);
    let cx = 0.5 * (p.x0 + p.x1);
    let hy = 0.5 * (p.y1 - p.y0);
    let cy = 0.5 * (p.y0 + p.y1);
    let mut sum = 0.0;
    for (ni, wi) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
        let x = cx + hx * ni;
        let mut inner = 0.0;
        for (nj, wj) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
            inner += wj * f(x, cy + hy * nj);
        }
        sum += wi * inner;
    }
    sum * hx * hy
}

/// Adaptive subdivision over the square [-range, range]²: each panel is
/// accepted once the refined estimate moves by less than its share of the
/// tolerance, otherwise split into quadrants. Returns the integral, the
/// accumulated error estimate, and whether every panel settled within
/// budget before the depth cap.
fn adaptive_panels(
    f: &impl Fn(f64, f64) -> f64,
    range: f64,
    tol: f64,
) -> (f64, f64, bool) {
    const ROOT_SPLIT: usize = 4;
    let step = 2.0 * range / ROOT_SPLIT as f64;
    let mut stack: Vec<Panel> = Vec::new();
    for i in 0..ROOT_SPLIT {
        for j in 0..ROOT_SPLIT {
            stack.push(Panel {
                x0: -range + i as f64 * step,
                x1: -range + (i + 1) as f64 * step,
                y0: -range + j as f64 * step,
                y1: -range + (j + 1) as f64 * step,
                budget: tol / (ROOT_SPLIT * ROOT_SPLIT) as f64,
                depth: C_LIMIT_MAX_DEPTH,
            });
        }
    }
    let mut value = 0.0;
    let mut achieved = 0.0;
    let mut converged = true;
    while let Some(p) = stack.pop() {
        let coarse = gl_panel(f, &p);
        let mx = 0.5 * (p.x0 + p.x1);
        let my = 0.5 * (p.y0 + p.y1);
        let children = [
            (p.x0, mx, p.y0, my),
            (mx, p.x1, p.y0, my),
            (p.x0, mx, my, p.y1),
            (mx, p.x1, my, p.y1),
        ];
        let child_panels = children.map(|(x0, x1, y0, y1)| Panel {
            x0,
            x1,
            y0,
            y1,
            budget: p.budget / 4.0,
            depth: p.depth.saturating_sub(1),
        });
        let fine: f64 = child_panels.iter().map(|c| gl_panel(f, c)).sum();
        let diff = (fine - coarse).abs();
        if diff <= p.budget {
            value += fine;
            achieved += diff;
        } else if p.depth == 0 {
            value += fine;
            achieved += diff;
            converged = false;
        } else {
            stack.extend(child_panels);
        }
    }
    (value, achieved, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::sigma_k_squared;
    use crate::numerics::SeededRng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    /// Closed form of the large-count limit entry, used as the quadrature
    /// oracle (derived by reducing the double integral to a Gaussian one).
    fn limit_oracle(rho: f64) -> f64 {
        2.0 * (0.5 * rho).asin()
    }

    #[test]
    fn mom_entry_is_the_arcsine_of_the_correlation() {
        for &phi in &[-1.5, -0.9, -0.3, 0.0, 0.4, 1.1, FRAC_PI_2] {
            let rho = phi.sin();
            let got = c_mom_entry(rho, (1.0, 1.0)).unwrap();
            assert!((got - phi).abs() < 1e-8, "phi={phi}: got {got}");
        }
        let scaled = c_mom_entry(0.5, (4.0, 9.0)).unwrap();
        let unit = c_mom_entry(0.5, (1.0, 1.0)).unwrap();
        assert!((scaled - 6.0 * unit).abs() < 1e-12);
    }

    #[test]
    fn independent_coordinates_have_zero_entries() {
        let inputs = CovEntryInputs {
            rho: 0.0,
            variances: (1.0, 1.0),
            k: 10,
        };
        assert!(c_matrix_entry(&inputs).unwrap().abs() < 1e-6);
        assert!(c_mom_entry(0.0, (1.0, 1.0)).unwrap().abs() < 1e-12);
        let limit = c_limit_entry(0.0).unwrap();
        assert!(limit.value.abs() < 1e-5, "got {}", limit.value);
    }

    #[test]
    fn perfect_correlation_collapses_to_the_variance_curve() {
        for k in [1, 2, 5, 10, 20, 50] {
            let entry = c_matrix_entry(&CovEntryInputs {
                rho: 1.0,
                variances: (1.0, 1.0),
                k,
            })
            .unwrap();
            let var = sigma_k_squared(k, 1.0).unwrap();
            assert!((entry - var).abs() < 1e-8, "k={k}: {entry} vs {var}");
        }
    }

    #[test]
    fn matrix_entry_matches_an_indicator_covariance_monte_carlo() {
        // Simulate the indicator-sum covariance the entry is the limit of,
        // in batches, and compare within three batch standard errors.
        let k = 10;
        let rho: f64 = 0.5;
        let spec = VrmomSpec::new(k).unwrap();
        let deltas = spec.deltas();
        let mut rng = SeededRng::new(0xc05e).child(1).stream();
        let batches = 20;
        let per_batch = 100_000;
        let beta = (1.0 - rho * rho).sqrt();
        let mut estimates = Vec::with_capacity(batches);
        for _ in 0..batches {
            let (mut s1_sum, mut s2_sum, mut prod_sum) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..per_batch {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let u: f64 = StandardNormal.sample(&mut rng);
                let z2 = rho * z1 + beta * u;
                let s1 = deltas.iter().filter(|&&d| z1 <= d).count() as f64;
                let s2 = deltas.iter().filter(|&&d| z2 <= d).count() as f64;
                s1_sum += s1;
                s2_sum += s2;
                prod_sum += s1 * s2;
            }
            let nf = per_batch as f64;
            let cov = prod_sum / nf - (s1_sum / nf) * (s2_sum / nf);
            estimates.push(cov / (spec.psi_sum() * spec.psi_sum()));
        }
        let mean = estimates.iter().sum::<f64>() / batches as f64;
        let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
            / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        let analytic = c_matrix_entry(&CovEntryInputs {
            rho,
            variances: (1.0, 1.0),
            k,
        })
        .unwrap();
        assert!(
            (analytic - mean).abs() <= 3.0 * se.max(1e-4),
            "analytic {analytic} vs mc {mean} (se {se})"
        );
    }

    #[test]
    fn limit_entry_matches_its_closed_form() {
        for &rho in &[-0.95, -0.7, -0.3, 0.0, 0.3, 0.7, 0.95] {
            let got = c_limit_entry(rho).unwrap();
            let want = limit_oracle(rho);
            assert!(
                (got.value - want).abs() < 1e-5,
                "rho={rho}: {} vs {want}",
                got.value
            );
            assert!(got.achieved_tolerance <= 1e-5);
        }
    }

    #[test]
    fn limit_entry_is_exact_at_perfect_correlation() {
        let pos = c_limit_entry(1.0).unwrap();
        assert_eq!(pos.value, PI / 3.0);
        assert_eq!(pos.achieved_tolerance, 0.0);
        let neg = c_limit_entry(-1.0).unwrap();
        assert_eq!(neg.value, -PI / 3.0);
    }

    #[test]
    fn finite_count_entry_approaches_the_limit_entry() {
        let finite = c_matrix_entry(&CovEntryInputs {
            rho: 0.3,
            variances: (1.0, 1.0),
            k: 200,
        })
        .unwrap();
        let limit = c_limit_entry(0.3).unwrap().value;
        assert!((finite - limit).abs() < 2e-2, "{finite} vs {limit}");
    }

    #[test]
    fn gap_curve_hits_its_pinned_values() {
        assert!(h_phi(0.0).unwrap().abs() < 1e-6);
        assert!((h_phi(FRAC_PI_6).unwrap() - 0.005_805_42).abs() < 2e-5);
        assert!((h_phi(FRAC_PI_4).unwrap() - 0.019_946_54).abs() < 2e-5);
        assert!((h_phi(FRAC_PI_2).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((h_phi(-FRAC_PI_2).unwrap() + 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn gap_matrix_stays_positive_semidefinite_on_a_coarse_grid() {
        // 2x2 difference matrix: diagonal π/2 − π/3, off-diagonal π·h(φ);
        // positive semidefiniteness reduces to |h| ≤ 1/6.
        let diag = FRAC_PI_2 - PI / 3.0;
        for i in 0..=18 {
            let phi = -FRAC_PI_2 + i as f64 * (PI / 18.0);
            let off = PI * h_phi(phi).unwrap();
            let det = diag * diag - off * off;
            assert!(det >= -1e-9, "phi={phi}: det {det}");
        }
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        assert!(matches!(
            c_matrix_entry(&CovEntryInputs {
                rho: 1.2,
                variances: (1.0, 1.0),
                k: 5
            }),
            Err(AnalysisError::CorrelationOutOfRange(_))
        ));
        assert!(matches!(
            c_matrix_entry(&CovEntryInputs {
                rho: 0.5,
                variances: (0.0, 1.0),
                k: 5
            }),
            Err(AnalysisError::InvalidVariance(_))
        ));
        assert!(matches!(
            c_matrix_entry(&CovEntryInputs {
                rho: 0.5,
                variances: (1.0, 1.0),
                k: 0
            }),
            Err(AnalysisError::InvalidK(0))
        ));
        assert!(matches!(
            c_limit_entry(-2.0),
            Err(AnalysisError::CorrelationOutOfRange(_))
        ));
        assert!(matches!(
            h_phi(2.0),
            Err(AnalysisError::AngleOutOfRange(_))
        ));
    }
}
