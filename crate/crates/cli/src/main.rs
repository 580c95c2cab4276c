//! `ttchaos` pipeline driver: coefficient expansion, operator assembly, solve
//! and statistics, each stage reading the previous stage's files from `--out`.

mod artifacts;
mod config;
mod error;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{PathSel, RunConfig};
use error::CliError;
use stages::Ctx;

#[derive(Parser)]
#[command(name = "ttchaos", version, about = "Stochastic Galerkin PCE in tensor-train format")]
struct Cli {
    #[command(subcommand)]
    stage: Stage,
}

#[derive(Subcommand)]
enum Stage {
    /// Expand the random coefficient (kappa.ttc, coefficients_sparse.csv).
    Expand(#[command(flatten)] Opts),
    /// Assemble the Galerkin operator (operator.ttc, operator_sparse.mtx).
    Assemble(#[command(flatten)] Opts),
    /// Solve the Galerkin system (solution.ttc, solution_sparse.csv).
    Solve(#[command(flatten)] Opts),
    /// Mean, variance, covariance error, Sobol indices and frequencies.
    Stats(#[command(flatten)] Opts),
    /// All four stages in sequence, plus timing.csv.
    Run(#[command(flatten)] Opts),
}

#[derive(clap::Args)]
struct Opts {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    path: Option<PathSel>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-iteration progress of the cross and PCG iterations on stderr.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Opts {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.path {
            cfg.path = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(stage: &Stage) -> Result<Vec<String>, CliError> {
    let opts = match stage {
        Stage::Expand(o) | Stage::Assemble(o) | Stage::Solve(o) | Stage::Stats(o) | Stage::Run(o) => o,
    };
    let mut ctx = Ctx::new(opts.config()?, opts.trace)?;
    match stage {
        Stage::Expand(_) => stages::expand(&mut ctx)?,
        Stage::Assemble(_) => stages::assemble(&mut ctx)?,
        Stage::Solve(_) => stages::solve(&mut ctx)?,
        Stage::Stats(_) => stages::stats(&mut ctx)?,
        Stage::Run(_) => {
            ctx.timed("expand", stages::expand)?;
            ctx.timed("assemble", stages::assemble)?;
            ctx.timed("solve", stages::solve)?;
            ctx.timed("stats", stages::stats)?;
            ctx.write_timing()?;
        }
    }
    Ok(ctx.unconverged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let trace = match &cli.stage {
        Stage::Expand(o) | Stage::Assemble(o) | Stage::Solve(o) | Stage::Stats(o) | Stage::Run(o) => o.trace,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if trace { "debug" } else { "info" }))
        .format_timestamp(None)
        .init();
    match execute(&cli.stage) {
        Ok(unconverged) if unconverged.is_empty() => ExitCode::SUCCESS,
        Ok(unconverged) => {
            eprintln!("not converged: {}", unconverged.join(", "));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
