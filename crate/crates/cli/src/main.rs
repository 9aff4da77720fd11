//! `ifs-decay <subcommand> <config.toml> [--out DIR]`
//!
//! Exit codes: 0 success, 1 config error, 2 IFS validation failure,
//! 3 runtime failure.

mod commands;
mod config;
mod error;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::commands::Command;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{render_report, ReportMeta};

#[derive(Parser, Debug)]
#[command(name = "ifs-decay", version, about = "Fourier decay experiments for self-conformal measures")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Check the contraction hypotheses and print rho, D, D'
    Validate(RunArgs),
    /// Monte Carlo Fourier coefficients of the stationary measure
    Fourier(RunArgs),
    /// Fit |F(q)| against C (log q)^-alpha on a geometric grid
    DecayFit(RunArgs),
    /// Birkhoff sums of the derivative cocycle and partition cells
    Walk(RunArgs),
    /// Kolmogorov distance of the normalised walk to its Gaussian limit
    Clt(RunArgs),
    /// Local limit ratios mu(C + v) / G_n(v)
    Llt(RunArgs),
    /// Smoothed local limit comparison
    SmoothLlt(RunArgs),
    /// Overshoot law of S_tau per partition cell
    Cllt(RunArgs),
    /// Leading eigenvalue of the twisted transfer operator
    OperatorEigen(RunArgs),
    /// Probe estimates of the operator norm gap at large theta
    Dolgopyat(RunArgs),
    /// Diophantine profile of the ratio logs
    Dio(RunArgs),
    /// Linearity test and temporal distance samples
    Linearity(RunArgs),
    /// Construct the linearising conjugacy
    Conjugate(RunArgs),
    /// Fourier decay along the (k, h') frequency schedule
    DecayPipeline(RunArgs),
}

impl Sub {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            Sub::Validate(a) => (Command::Validate, a),
            Sub::Fourier(a) => (Command::Fourier, a),
            Sub::DecayFit(a) => (Command::DecayFit, a),
            Sub::Walk(a) => (Command::Walk, a),
            Sub::Clt(a) => (Command::Clt, a),
            Sub::Llt(a) => (Command::Llt, a),
            Sub::SmoothLlt(a) => (Command::SmoothLlt, a),
            Sub::Cllt(a) => (Command::Cllt, a),
            Sub::OperatorEigen(a) => (Command::OperatorEigen, a),
            Sub::Dolgopyat(a) => (Command::Dolgopyat, a),
            Sub::Dio(a) => (Command::Dio, a),
            Sub::Linearity(a) => (Command::Linearity, a),
            Sub::Conjugate(a) => (Command::Conjugate, a),
            Sub::DecayPipeline(a) => (Command::DecayPipeline, a),
        }
    }
}

fn execute(command: Command, args: &RunArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let workers = cfg.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let start = Instant::now();
    let (out, passed) = pool.install(|| commands::run(command, &cfg))?;
    let seconds = start.elapsed().as_secs_f64();

    fs::create_dir_all(&dir)?;
    for f in &out.files {
        f.write(&dir)?;
    }
    let meta = ReportMeta {
        command: command.name(),
        config_path: &args.config,
        config_text: &text,
        workers,
        seconds,
        status: if passed { "ok" } else { "validation failed" },
    };
    fs::write(dir.join("report.txt"), render_report(&meta, &out))?;
    for line in &out.summary {
        println!("{line}");
    }
    println!("wrote {} file(s) to {}", out.files.len() + 1, dir.display());
    if passed {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "see {}",
            dir.join("report.txt").display()
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ifs-decay {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
