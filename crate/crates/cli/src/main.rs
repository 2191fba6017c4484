//! Command-line front end for the Byzantine-tolerant estimation simulator.
//!
//! Subcommands: `mean-sim` (one-shot distributed location estimation),
//! `rcsl-sim` (iterated robust-surrogate regression), and `analyze`
//! (closed-form / quadrature reports). Exit codes: 0 success, 1 usage
//! error, 2 runtime failure. `BYZSIM_THREADS` caps worker parallelism.

mod analyze;
mod config;
mod table;

use clap::Parser;
use config::{AppError, Mode, SimArgs};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "byzsim",
    version,
    about = "Robust distributed estimation and learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// One-shot distributed location estimation table.
    MeanSim(Box<SimArgs>),
    /// Iterated robust-surrogate regression table.
    RcslSim(Box<SimArgs>),
    /// Closed-form and quadrature reports.
    Analyze(analyze::AnalyzeArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive as "errors" that exit cleanly.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Err(err) = init_thread_pool() {
        eprintln!("byzsim: {err}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::MeanSim(args) => run_sim(Mode::Mean, *args),
        Command::RcslSim(args) => run_sim(Mode::Rcsl, *args),
        Command::Analyze(args) => analyze::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ AppError::Usage(_)) => {
            eprintln!("byzsim: {err}");
            ExitCode::from(1)
        }
        Err(err @ AppError::Runtime(_)) => {
            eprintln!("byzsim: {err}");
            ExitCode::from(2)
        }
    }
}

fn run_sim(mode: Mode, args: SimArgs) -> Result<(), AppError> {
    let config = config::parse_config(mode, args)?;
    let result = table::run_table(&config)?;
    let rendered = table::emit(&result, config.format);
    table::write_output(&rendered, config.out.as_deref())
}

fn init_thread_pool() -> Result<(), AppError> {
    let Ok(raw) = std::env::var("BYZSIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| AppError::Usage(format!("BYZSIM_THREADS={raw}: need a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| AppError::Runtime(anyhow::anyhow!("thread pool: {e}")))
}
