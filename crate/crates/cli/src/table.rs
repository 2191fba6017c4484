//! Experiment grid execution and table emission.
//!
//! Each (alpha, quantile-count) cell runs the configured aggregator and
//! the baseline aggregator under the *same* replication seeds, so the
//! ratio column compares the two on identical data and Byzantine sets.

use crate::config::{AppError, ExperimentConfig, FormatName, Mode};
use byzsim_core::numerics::SeededRng;
use byzsim_core::simulator::{
    run_replications, CellConfig, ErrorMetric, SimMode, SyntheticSpec,
};
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_HEADER: &str = "mode,model,aggregator,K,m,n,p,alpha,attack,reps,seed,\
rmse,rmse_std,baseline_rmse,ratio,mean_iters,nonconverged";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub mode: String,
    pub model: String,
    pub aggregator: String,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub attack: String,
    pub reps: usize,
    pub seed: u64,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done {
        rmse: f64,
        /// Sample standard deviation of per-replication errors; absent for
        /// a single replication.
        rmse_std: Option<f64>,
        baseline_rmse: f64,
        ratio: f64,
        /// Absent in mean mode.
        mean_iters: Option<f64>,
        nonconverged: usize,
    },
    Failed {
        /// Single-line message, commas stripped so the CSV stays rectangular.
        message: String,
    },
}

fn sanitize(message: String) -> String {
    message
        .chars()
        .map(|c| match c {
            ',' | '\n' | '\r' => ' ',
            other => other,
        })
        .collect()
}

/// Runs the full grid. Per-cell failures become [`CellOutcome::Failed`]
/// rows; the table is always produced.
pub fn run_table(config: &ExperimentConfig) -> Result<ResultTable, AppError> {
    let mut rows = Vec::new();
    let master = SeededRng::new(config.seed);
    let mut cell_index = 0u64;
    for &alpha in &config.alphas {
        for &k in &config.ks {
            let cell_master = master.child(cell_index);
            cell_index += 1;
            let outcome = run_cell(config, alpha, k, cell_master)
                .unwrap_or_else(|message| CellOutcome::Failed {
                    message: sanitize(message),
                });
            rows.push(Row {
                mode: config.mode.name().to_string(),
                model: match config.mode {
                    Mode::Mean => "-".to_string(),
                    Mode::Rcsl => config.model.name().to_string(),
                },
                aggregator: match config.aggregator.to_spec(k, config.trim_beta) {
                    Ok(spec) => spec.name().to_string(),
                    Err(_) => "invalid".to_string(),
                },
                k,
                m: config.m,
                n: config.n,
                p: config.p,
                alpha,
                attack: config.attack.name().to_string(),
                reps: config.reps,
                seed: config.seed,
                outcome,
            });
        }
    }
    Ok(ResultTable { rows })
}

fn run_cell(
    config: &ExperimentConfig,
    alpha: f64,
    k: usize,
    cell_master: SeededRng,
) -> Result<CellOutcome, String> {
    let synthetic = match config.mode {
        Mode::Mean => SyntheticSpec::location(config.p),
        Mode::Rcsl => {
            SyntheticSpec::regression(config.model.to_spec(config.p), config.covariate_mean)
        }
    };
    let cell = |aggregator_name: crate::config::AggregatorName| -> Result<_, String> {
        let aggregator = aggregator_name
            .to_spec(k, config.trim_beta)
            .map_err(|e| e.to_string())?;
        let cc = CellConfig {
            mode: match config.mode {
                Mode::Mean => SimMode::Mean,
                Mode::Rcsl => SimMode::Rcsl,
            },
            synthetic: synthetic.clone(),
            m: config.m,
            n: config.n,
            alpha,
            attack: config.attack.to_spec(),
            aggregator,
            stop: config.stop.to_rule(),
            reps: config.reps,
            metric: ErrorMetric::MeanNorm,
        };
        run_replications(&cc, cell_master).map_err(|e| e.to_string())
    };
    let configured = cell(config.aggregator)?;
    let baseline = cell(config.baseline)?;
    Ok(CellOutcome::Done {
        rmse: configured.rmse,
        rmse_std: configured.rmse_std,
        baseline_rmse: baseline.rmse,
        ratio: configured.rmse / baseline.rmse,
        mean_iters: configured.mean_iterations(),
        nonconverged: configured.nonconverged,
    })
}

fn opt_float(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "n/a".to_string(),
    }
}

/// CSV with exactly the documented header; floats use the shortest
/// round-trippable representation.
pub fn emit_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        let prefix = format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.mode,
            row.model,
            row.aggregator,
            row.k,
            row.m,
            row.n,
            row.p,
            row.alpha,
            row.attack,
            row.reps,
            row.seed
        );
        match &row.outcome {
            CellOutcome::Done {
                rmse,
                rmse_std,
                baseline_rmse,
                ratio,
                mean_iters,
                nonconverged,
            } => {
                let _ = writeln!(
                    out,
                    "{prefix},{},{},{},{},{},{}",
                    rmse,
                    opt_float(*rmse_std),
                    baseline_rmse,
                    ratio,
                    opt_float(*mean_iters),
                    nonconverged
                );
            }
            CellOutcome::Failed { message } => {
                let _ = writeln!(out, "{prefix},failed:{message},n/a,n/a,n/a,n/a,n/a");
            }
        }
    }
    out
}

/// Markdown mirror of the CSV layout.
pub fn emit_markdown(table: &ResultTable) -> String {
    let cols: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
    for line in emit_csv(table).lines().skip(1) {
        let _ = writeln!(out, "| {} |", line.split(',').collect::<Vec<_>>().join(" | "));
    }
    out
}

pub fn emit(table: &ResultTable, format: FormatName) -> String {
    match format {
        FormatName::Csv => emit_csv(table),
        FormatName::Markdown => emit_markdown(table),
    }
}

/// Strict inverse of [`emit_csv`]; exercised by the round-trip tests.
#[cfg(test)]
pub fn parse_csv(text: &str) -> Result<ResultTable, AppError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CSV_HEADER {
        return Err(AppError::Usage(format!("unexpected CSV header: {header}")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 17 {
            return Err(AppError::Usage(format!(
                "line {}: expected 17 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let parse_err = |field: &str, what: &str| {
            AppError::Usage(format!("line {}: bad {what}: {field}", idx + 2))
        };
        let outcome = if let Some(message) = fields[11].strip_prefix("failed:") {
            CellOutcome::Failed {
                message: message.to_string(),
            }
        } else {
            let float = |i: usize, what: &str| -> Result<f64, AppError> {
                fields[i].parse().map_err(|_| parse_err(fields[i], what))
            };
            let opt = |i: usize, what: &str| -> Result<Option<f64>, AppError> {
                if fields[i] == "n/a" {
                    Ok(None)
                } else {
                    float(i, what).map(Some)
                }
            };
            CellOutcome::Done {
                rmse: float(11, "rmse")?,
                rmse_std: opt(12, "rmse_std")?,
                baseline_rmse: float(13, "baseline_rmse")?,
                ratio: float(14, "ratio")?,
                mean_iters: opt(15, "mean_iters")?,
                nonconverged: fields[16]
                    .parse()
                    .map_err(|_| parse_err(fields[16], "nonconverged"))?,
            }
        };
        rows.push(Row {
            mode: fields[0].to_string(),
            model: fields[1].to_string(),
            aggregator: fields[2].to_string(),
            k: fields[3].parse().map_err(|_| parse_err(fields[3], "K"))?,
            m: fields[4].parse().map_err(|_| parse_err(fields[4], "m"))?,
            n: fields[5].parse().map_err(|_| parse_err(fields[5], "n"))?,
            p: fields[6].parse().map_err(|_| parse_err(fields[6], "p"))?,
            alpha: fields[7]
                .parse()
                .map_err(|_| parse_err(fields[7], "alpha"))?,
            attack: fields[8].to_string(),
            reps: fields[9].parse().map_err(|_| parse_err(fields[9], "reps"))?,
            seed: fields[10]
                .parse()
                .map_err(|_| parse_err(fields[10], "seed"))?,
            outcome,
        });
    }
    Ok(ResultTable { rows })
}

/// Writes to the given path, or stdout when absent.
pub fn write_output(content: &str, out: Option<&Path>) -> Result<(), AppError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| AppError::Runtime(anyhow::anyhow!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
