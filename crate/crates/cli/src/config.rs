//! Experiment configuration: JSON file + flag merging and validation.

use byzsim_core::aggregators::AggregatorSpec;
use byzsim_core::attacks::AttackSpec;
use byzsim_core::models::ModelSpec;
use byzsim_core::simulator::StoppingRule;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

/// Top-level failure classification driving the process exit code:
/// usage errors exit 1, runtime failures exit 2.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(msg) => write!(f, "{msg}"),
            AppError::Runtime(err) => write!(f, "{err:#}"),
        }
    }
}

impl<E> From<E> for AppError
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn from(err: E) -> Self {
        AppError::Runtime(anyhow::Error::new(err))
    }
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mean,
    Rcsl,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mean => "mean",
            Mode::Rcsl => "rcsl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Linear,
    Logistic,
    Huber,
}

impl ModelName {
    pub fn name(self) -> &'static str {
        match self {
            ModelName::Linear => "linear",
            ModelName::Logistic => "logistic",
            ModelName::Huber => "huber",
        }
    }

    pub fn to_spec(self, p: usize) -> ModelSpec {
        match self {
            ModelName::Linear => ModelSpec::linear(p),
            ModelName::Logistic => ModelSpec::logistic(p),
            ModelName::Huber => ModelSpec::huber(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorName {
    Vrmom,
    Mom,
    Mean,
    TrimmedMean,
}

impl AggregatorName {
    pub fn to_spec(self, k: usize, beta: f64) -> Result<AggregatorSpec, AppError> {
        match self {
            AggregatorName::Vrmom => {
                AggregatorSpec::vrmom(k).map_err(|e| usage(format!("--k: {e}")))
            }
            AggregatorName::Mom => Ok(AggregatorSpec::Mom),
            AggregatorName::Mean => Ok(AggregatorSpec::Mean),
            AggregatorName::TrimmedMean => {
                AggregatorSpec::trimmed_mean(beta).map_err(|e| usage(format!("--beta: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AttackName {
    None,
    Gaussian,
    Omniscient,
    Bitflip,
    Labelflip,
}

impl AttackName {
    pub fn name(self) -> &'static str {
        match self {
            AttackName::None => "none",
            AttackName::Gaussian => "gaussian",
            AttackName::Omniscient => "omniscient",
            AttackName::Bitflip => "bitflip",
            AttackName::Labelflip => "labelflip",
        }
    }

    pub fn to_spec(self) -> AttackSpec {
        match self {
            AttackName::None => AttackSpec::none(),
            AttackName::Gaussian => AttackSpec::gaussian_noise(),
            AttackName::Omniscient => AttackSpec::omniscient(),
            AttackName::Bitflip => AttackSpec::bit_flip(),
            AttackName::Labelflip => AttackSpec::label_flip(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FormatName {
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StopName {
    Tol,
    Fixed,
}

/// Stopping rule in configuration form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum StopConfig {
    Tol { tol: f64, max_iters: usize },
    Fixed { iters: usize },
}

impl StopConfig {
    pub fn to_rule(self) -> StoppingRule {
        match self {
            StopConfig::Tol { tol, max_iters } => StoppingRule::Tolerance {
                e_r: tol,
                max_iters,
            },
            StopConfig::Fixed { iters } => StoppingRule::FixedIterations(iters),
        }
    }
}

/// Full experiment description; every field serializes losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelName,
    pub aggregator: AggregatorName,
    /// Reference aggregator every cell is ratioed against.
    pub baseline: AggregatorName,
    /// Per-tail trim fraction when an aggregator is the trimmed mean.
    pub trim_beta: f64,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub alphas: Vec<f64>,
    pub attack: AttackName,
    pub ks: Vec<usize>,
    pub reps: usize,
    pub stop: StopConfig,
    pub seed: u64,
    /// Covariate mean for regression designs.
    pub covariate_mean: f64,
    pub format: FormatName,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Mean,
            model: ModelName::Linear,
            aggregator: AggregatorName::Vrmom,
            baseline: AggregatorName::Mom,
            trim_beta: 0.1,
            m: 100,
            n: 1000,
            p: 30,
            alphas: vec![0.0],
            attack: AttackName::None,
            ks: vec![10],
            reps: 500,
            stop: StopConfig::Tol {
                tol: 1e-4,
                max_iters: 50,
            },
            seed: 1,
            covariate_mean: 0.0,
            format: FormatName::Csv,
            out: None,
        }
    }
}

/// Flags shared by the two simulation subcommands. Every flag overrides
/// the corresponding config-file field.
#[derive(Debug, Default, clap::Args)]
pub struct SimArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Regression model (rcsl-sim only).
    #[arg(long)]
    pub model: Option<ModelName>,
    #[arg(long)]
    pub aggregator: Option<AggregatorName>,
    /// Aggregator the ratio column compares against.
    #[arg(long)]
    pub baseline: Option<AggregatorName>,
    /// Per-tail trim fraction for the trimmed-mean aggregator.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Quantile counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Worker count (the master is an extra machine).
    #[arg(long)]
    pub m: Option<usize>,
    /// Samples per machine.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension.
    #[arg(long)]
    pub p: Option<usize>,
    /// Byzantine fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub attack: Option<AttackName>,
    /// Replications per cell.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed; every stream derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stopping rule kind.
    #[arg(long)]
    pub stop: Option<StopName>,
    /// Relative-change tolerance for the tol rule.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration count (fixed rule) or cap (tol rule).
    #[arg(long)]
    pub iters: Option<usize>,
    /// Covariate mean for regression designs.
    #[arg(long = "mu-x")]
    pub mu_x: Option<f64>,
    #[arg(long)]
    pub format: Option<FormatName>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads the optional config file, overlays flags, and validates.
pub fn parse_config(mode: Mode, args: SimArgs) -> Result<ExperimentConfig, AppError> {
    let mut config = match &args.config {
        None => ExperimentConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                usage(format!("--config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("--config {}: {e}", path.display())))?
        }
    };
    config.mode = mode;
    if let Some(v) = args.model {
        config.model = v;
    }
    if let Some(v) = args.aggregator {
        config.aggregator = v;
    }
    if let Some(v) = args.baseline {
        config.baseline = v;
    }
    if let Some(v) = args.beta {
        config.trim_beta = v;
    }
    if let Some(v) = args.k {
        config.ks = v;
    }
    if let Some(v) = args.m {
        config.m = v;
    }
    if let Some(v) = args.n {
        config.n = v;
    }
    if let Some(v) = args.p {
        config.p = v;
    }
    if let Some(v) = args.alpha {
        config.alphas = v;
    }
    if let Some(v) = args.attack {
        config.attack = v;
    }
    if let Some(v) = args.reps {
        config.reps = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    match args.stop {
        Some(StopName::Tol) => {
            let tol = args.tol.unwrap_or(match config.stop {
                StopConfig::Tol { tol, .. } => tol,
                StopConfig::Fixed { .. } => 1e-4,
            });
            let max_iters = args.iters.unwrap_or(match config.stop {
                StopConfig::Tol { max_iters, .. } => max_iters,
                StopConfig::Fixed { .. } => 50,
            });
            config.stop = StopConfig::Tol { tol, max_iters };
        }
        Some(StopName::Fixed) => {
            if args.tol.is_some() {
                return Err(usage("--tol requires --stop tol"));
            }
            config.stop = StopConfig::Fixed {
                iters: args.iters.unwrap_or(10),
            };
        }
        None => {
            if let Some(tol) = args.tol {
                match &mut config.stop {
                    StopConfig::Tol { tol: t, .. } => *t = tol,
                    StopConfig::Fixed { .. } => {
                        return Err(usage("--tol requires --stop tol"));
                    }
                }
            }
            if let Some(iters) = args.iters {
                match &mut config.stop {
                    StopConfig::Tol { max_iters, .. } => *max_iters = iters,
                    StopConfig::Fixed { iters: i } => *i = iters,
                }
            }
        }
    }
    if let Some(v) = args.mu_x {
        config.covariate_mean = v;
    }
    if let Some(v) = args.format {
        config.format = v;
    }
    if let Some(v) = args.out {
        config.out = Some(v);
    }
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ExperimentConfig) -> Result<(), AppError> {
    if config.m == 0 || config.n == 0 || config.p == 0 {
        return Err(usage("--m, --n, and --p must be positive"));
    }
    if config.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if config.ks.is_empty() || config.ks.contains(&0) {
        return Err(usage("--k needs at least one positive quantile count"));
    }
    if config.alphas.is_empty() {
        return Err(usage("--alpha needs at least one value"));
    }
    for &a in &config.alphas {
        if !(0.0..0.5).contains(&a) {
            return Err(usage(format!(
                "--alpha {a}: Byzantine fraction must lie in [0, 0.5)"
            )));
        }
    }
    if !(0.0..0.5).contains(&config.trim_beta) {
        return Err(usage(format!(
            "--beta {}: trim fraction must lie in [0, 0.5)",
            config.trim_beta
        )));
    }
    match config.stop {
        StopConfig::Tol { tol, max_iters } => {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(usage(format!("--tol {tol}: must be positive and finite")));
            }
            if max_iters == 0 {
                return Err(usage("--iters: iteration cap must be at least 1"));
            }
        }
        StopConfig::Fixed { iters } => {
            if iters == 0 {
                return Err(usage("--iters: iteration count must be at least 1"));
            }
        }
    }
    if config.attack == AttackName::Labelflip {
        if config.mode != Mode::Rcsl {
            return Err(usage("--attack labelflip: only valid with rcsl-sim"));
        }
        if config.model != ModelName::Logistic {
            return Err(usage("--attack labelflip: requires --model logistic"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_setup() {
        let config = parse_config(Mode::Mean, SimArgs::default()).unwrap();
        assert_eq!(config.m, 100);
        assert_eq!(config.n, 1000);
        assert_eq!(config.p, 30);
        assert_eq!(config.ks, vec![10]);
        assert_eq!(config.reps, 500);
        assert_eq!(
            config.stop,
            StopConfig::Tol {
                tol: 1e-4,
                max_iters: 50
            }
        );
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut config = ExperimentConfig::default();
        config.alphas = vec![0.0, 0.05, 0.1, 0.15];
        config.seed = 987654321;
        config.stop = StopConfig::Fixed { iters: 7 };
        config.out = Some(PathBuf::from("table.csv"));
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("byzsim-config-{}.json", std::process::id()));
        let mut file_config = ExperimentConfig::default();
        file_config.m = 7;
        file_config.reps = 3;
        std::fs::write(&path, serde_json::to_string(&file_config).unwrap()).unwrap();
        let args = SimArgs {
            config: Some(path.clone()),
            m: Some(9),
            ..SimArgs::default()
        };
        let config = parse_config(Mode::Mean, args).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(config.m, 9);
        assert_eq!(config.reps, 3);
    }

    #[test]
    fn alpha_list_sweeps_four_cells() {
        let args = SimArgs {
            alpha: Some(vec![0.0, 0.05, 0.1, 0.15]),
            ..SimArgs::default()
        };
        let config = parse_config(Mode::Mean, args).unwrap();
        assert_eq!(config.alphas.len(), 4);
    }

    #[test]
    fn invalid_combinations_are_usage_errors() {
        let label_flip_linear = SimArgs {
            attack: Some(AttackName::Labelflip),
            model: Some(ModelName::Linear),
            ..SimArgs::default()
        };
        assert!(matches!(
            parse_config(Mode::Rcsl, label_flip_linear),
            Err(AppError::Usage(_))
        ));
        let label_flip_mean = SimArgs {
            attack: Some(AttackName::Labelflip),
            ..SimArgs::default()
        };
        assert!(matches!(
            parse_config(Mode::Mean, label_flip_mean),
            Err(AppError::Usage(_))
        ));
        let bad_alpha = SimArgs {
            alpha: Some(vec![0.6]),
            ..SimArgs::default()
        };
        assert!(matches!(
            parse_config(Mode::Mean, bad_alpha),
            Err(AppError::Usage(_))
        ));
        let bad_tol = SimArgs {
            tol: Some(0.0),
            ..SimArgs::default()
        };
        assert!(matches!(
            parse_config(Mode::Rcsl, bad_tol),
            Err(AppError::Usage(_))
        ));
        let tol_on_fixed = SimArgs {
            stop: Some(StopName::Fixed),
            ..SimArgs::default()
        };
        let config = parse_config(Mode::Rcsl, tol_on_fixed).unwrap();
        assert_eq!(config.stop, StopConfig::Fixed { iters: 10 });
        let conflicting = SimArgs {
            config: None,
            tol: Some(1e-3),
            stop: Some(StopName::Fixed),
            ..SimArgs::default()
        };
        assert!(matches!(
            parse_config(Mode::Rcsl, conflicting),
            Err(AppError::Usage(_))
        ));
    }

    #[test]
    fn labelflip_with_logistic_rcsl_is_accepted() {
        let args = SimArgs {
            attack: Some(AttackName::Labelflip),
            model: Some(ModelName::Logistic),
            ..SimArgs::default()
        };
        assert!(parse_config(Mode::Rcsl, args).is_ok());
    }
}
