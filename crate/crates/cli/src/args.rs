use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Experiments on sub-Bergman determinantal point processes in the unit disc.
#[derive(Debug, Parser)]
#[command(name = "rigidity-lab", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file (written atomically). Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads. Falls back to the config file, then to the
    /// RIGIDITY_LAB_WORKERS environment variable.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Absolute quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Quadrature evaluation budget per integral.
    #[arg(long, global = true)]
    pub max_evals: Option<usize>,

    /// Index set as JSON: an array or a generator such as
    /// '{"kind":"powers","base":2,"max_exp":12}'.
    #[arg(long, global = true)]
    pub lambda: Option<String>,

    /// Largest exponent kept in the kernel.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Variance of cutoff statistics along a radius sweep.
    Variance {
        #[arg(long)]
        r0: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        rs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Exact samples, a point dump and count statistics.
    Sample {
        #[arg(long)]
        samples: Option<u64>,
        /// Radius of the counting disc.
        #[arg(long)]
        radius: Option<f64>,
        /// Bins of the radial goodness-of-fit test.
        #[arg(long)]
        bins: Option<usize>,
        /// Where to write the statistics JSON.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// The four cutoff-energy integrals, their bounds and C₂.
    Lemma {
        #[arg(long)]
        r0: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        rs: Option<Vec<f64>>,
    },
    /// Split an index set into lacunary pieces.
    Decompose,
    /// Block-count law of the Bernoulli index set.
    Bernoulli {
        #[arg(long)]
        c: Option<u32>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// Bloch-norm estimates at several caps.
    Bloch {
        #[arg(long, value_delimiter = ',')]
        caps: Option<Vec<u64>>,
    },
}
