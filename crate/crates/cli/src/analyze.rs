//! Closed-form and quadrature report subcommands.

use crate::config::{AppError, FormatName};
use crate::table::write_output;
use byzsim_core::analysis::{
    c_matrix_entry, c_mom_entry, h_phi, sigma_k_squared, CovEntryInputs, EfficiencyReport,
    MOM_EFFICIENCY, VRMOM_LIMIT_EFFICIENCY,
};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub what: AnalyzeCommand,
}

const DEFAULT_KS: &[usize] = &[1, 2, 5, 10, 20, 50, 100, 200];

#[derive(Debug, clap::Subcommand)]
pub enum AnalyzeCommand {
    /// Limiting variance of the corrected aggregator per quantile count.
    SigmaK {
        /// Quantile counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        /// Data variance the curve is scaled by.
        #[arg(long, default_value_t = 1.0)]
        sigma_sq: f64,
        #[arg(long, value_enum, default_value_t = FormatName::Csv)]
        format: FormatName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Efficiency per quantile count, with the uncorrected-median and
    /// large-count reference constants.
    Efficiency {
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = FormatName::Csv)]
        format: FormatName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Limiting covariance entries for a correlated coordinate pair.
    CMatrix {
        /// Correlations, comma separated.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        /// Quantile count.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value_t = FormatName::Csv)]
        format: FormatName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Off-diagonal gap curve h over an angle grid.
    Hphi {
        /// Grid size over [-pi/2, pi/2], endpoints included.
        #[arg(long, default_value_t = 181)]
        points: usize,
        #[arg(long, value_enum, default_value_t = FormatName::Csv)]
        format: FormatName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Renders rows under a comma-joined header as CSV or a markdown table.
fn render(header: &[&str], rows: &[Vec<String>], format: FormatName) -> String {
    let mut out = String::new();
    match format {
        FormatName::Csv => {
            let _ = writeln!(out, "{}", header.join(","));
            for row in rows {
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        FormatName::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
    }
    out
}

pub fn run(args: AnalyzeArgs) -> Result<(), AppError> {
    match args.what {
        AnalyzeCommand::SigmaK {
            k,
            sigma_sq,
            format,
            out,
        } => {
            if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
                return Err(AppError::Usage(format!(
                    "--sigma-sq {sigma_sq}: must be positive and finite"
                )));
            }
            let ks = validated_ks(k)?;
            let rows = ks
                .iter()
                .map(|&k| {
                    let v = sigma_k_squared(k, sigma_sq)?;
                    Ok(vec![k.to_string(), v.to_string()])
                })
                .collect::<Result<Vec<_>, AppError>>()?;
            write_output(&render(&["K", "sigma_k_sq"], &rows, format), out.as_deref())
        }
        AnalyzeCommand::Efficiency { k, format, out } => {
            let ks = validated_ks(k)?;
            let rows = ks
                .iter()
                .map(|&k| {
                    let report = EfficiencyReport::for_k(k)?;
                    Ok(vec![
                        k.to_string(),
                        report.sigma_k_sq_over_sigma_sq.to_string(),
                        report.efficiency.to_string(),
                        MOM_EFFICIENCY.to_string(),
                        VRMOM_LIMIT_EFFICIENCY.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>, AppError>>()?;
            let header = [
                "K",
                "sigma_k_sq_over_sigma_sq",
                "efficiency",
                "mom_efficiency",
                "limit_efficiency",
            ];
            write_output(&render(&header, &rows, format), out.as_deref())
        }
        AnalyzeCommand::CMatrix {
            rho,
            k,
            format,
            out,
        } => {
            if k == 0 {
                return Err(AppError::Usage("--k: must be at least 1".into()));
            }
            let rhos = rho.unwrap_or_else(|| (-10..=10).map(|i| i as f64 / 10.0).collect());
            for &r in &rhos {
                if !(r.abs() <= 1.0) {
                    return Err(AppError::Usage(format!(
                        "--rho {r}: correlation must lie in [-1, 1]"
                    )));
                }
            }
            let rows = rhos
                .iter()
                .map(|&rho| {
                    let entry = c_matrix_entry(&CovEntryInputs {
                        rho,
                        variances: (1.0, 1.0),
                        k,
                    })?;
                    let mom = c_mom_entry(rho, (1.0, 1.0))?;
                    Ok(vec![
                        rho.to_string(),
                        k.to_string(),
                        entry.to_string(),
                        mom.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>, AppError>>()?;
            let header = ["rho", "K", "c_entry", "c_mom_entry"];
            write_output(&render(&header, &rows, format), out.as_deref())
        }
        AnalyzeCommand::Hphi {
            points,
            format,
            out,
        } => {
            if points < 2 {
                return Err(AppError::Usage("--points: need at least 2".into()));
            }
            let step = PI / (points - 1) as f64;
            let rows = (0..points)
                .map(|i| {
                    let phi = (-FRAC_PI_2 + i as f64 * step).clamp(-FRAC_PI_2, FRAC_PI_2);
                    let h = h_phi(phi)?;
                    Ok(vec![phi.to_string(), h.to_string()])
                })
                .collect::<Result<Vec<_>, AppError>>()?;
            write_output(&render(&["phi", "h"], &rows, format), out.as_deref())
        }
    }
}

fn validated_ks(k: Option<Vec<usize>>) -> Result<Vec<usize>, AppError> {
    let ks = k.unwrap_or_else(|| DEFAULT_KS.to_vec());
    if ks.is_empty() || ks.contains(&0) {
        return Err(AppError::Usage(
            "--k needs at least one positive quantile count".into(),
        ));
    }
    Ok(ks)
}
