//! Command-line front end for `rigidity-lab`.
//!
//! Each subcommand reads an optional JSON config, overlays command-line flags,
//! validates everything, and only then computes and writes its output.
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
//! 4 I/O failure.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use args::{Cli, Command};
use config::{parse_lambda, ExperimentConfig};
pub use error::CliError;

/// Environment variable supplying the worker count when neither the flag nor
/// the config sets one.
pub const WORKERS_ENV: &str = "RIGIDITY_LAB_WORKERS";

/// Folds the flags into the file config (flags win).
pub fn merge(cli: &Cli, mut cfg: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    fn set<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    set(&mut cfg.output.path, &cli.out);
    set(&mut cfg.output.format, &cli.format);
    set(&mut cfg.mc.seed, &cli.seed);
    set(&mut cfg.mc.workers, &cli.workers);
    set(&mut cfg.quad.abs_tol, &cli.tol);
    set(&mut cfg.quad.max_evals, &cli.max_evals);
    set(&mut cfg.kernel.cap, &cli.cap);
    if let Some(text) = &cli.lambda {
        cfg.kernel.lambda = Some(parse_lambda(text)?);
    }
    match &cli.command {
        Command::Variance { r0, rs, eps } => {
            set(&mut cfg.cutoff.r0, r0);
            set(&mut cfg.cutoff.rs, rs);
            set(&mut cfg.eps, eps);
        }
        Command::Sample {
            samples,
            radius,
            bins,
            stats,
        } => {
            set(&mut cfg.mc.samples, samples);
            set(&mut cfg.mc.radius, radius);
            set(&mut cfg.mc.bins, bins);
            set(&mut cfg.output.stats_path, stats);
        }
        Command::Lemma { r0, rs } => {
            set(&mut cfg.cutoff.r0, r0);
            set(&mut cfg.cutoff.rs, rs);
        }
        Command::Decompose => {}
        Command::Bernoulli {
            c,
            n,
            trials,
            n_max,
        } => {
            set(&mut cfg.bernoulli.c, c);
            set(&mut cfg.bernoulli.n, n);
            set(&mut cfg.bernoulli.trials, trials);
            set(&mut cfg.bernoulli.n_max, n_max);
        }
        Command::Bloch { caps } => set(&mut cfg.bloch.caps, caps),
    }
    if cfg.mc.workers.is_none() {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            let w = v.trim().parse().map_err(|_| {
                CliError::field(WORKERS_ENV, format!("not a positive integer: {v:?}"))
            })?;
            cfg.mc.workers = Some(w);
        }
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = merge(&cli, file)?;
    let plan = match cli.command {
        Command::Variance { .. } => commands::plan_variance(&cfg)?,
        Command::Sample { .. } => commands::plan_sample(&cfg)?,
        Command::Lemma { .. } => commands::plan_lemma(&cfg)?,
        Command::Decompose => commands::plan_decompose(&cfg)?,
        Command::Bernoulli { .. } => commands::plan_bernoulli(&cfg)?,
        Command::Bloch { .. } => commands::plan_bloch(&cfg)?,
    };
    match cfg.workers()? {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::field("workers", e))?
            .install(|| plan.execute()),
        None => plan.execute(),
    }
}
