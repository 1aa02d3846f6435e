use std::fmt::Write as _;
use std::path::PathBuf;

use rigidity_lab::hyperbolic::{c2_constant, LemmaReport};
use rigidity_lab::indexset::{default_bloch_grid, verify_decomposition};
use rigidity_lab::random_subset::{
    block_counts, empirical_block_law, harmonic, non_lacunarity_witness, sample_lambda,
    size_moments,
};
use rigidity_lab::sampler::{radial_chi_square, sample_many, samples_to_csv};
use rigidity_lab::variance::rigidity_sweep;
use rigidity_lab::{Cutoff, IndexSet, KernelSpec, Moments, QuadResult, RngState};
use serde::Serialize;

use crate::args::Format;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{check_target, emit, to_json};

/// A validated command ready to run.
pub trait Plan: Send {
    fn execute(self: Box<Self>) -> Result<(), CliError>;
}

fn format(cfg: &ExperimentConfig, default: Format) -> Format {
    cfg.output.format.unwrap_or(default)
}

fn json_only(cfg: &ExperimentConfig, command: &str) -> Result<(), CliError> {
    match cfg.output.format {
        Some(Format::Csv) => Err(CliError::field(
            "format",
            format!("{command} only writes json"),
        )),
        _ => Ok(()),
    }
}

fn out_path(cfg: &ExperimentConfig) -> Result<Option<PathBuf>, CliError> {
    if let Some(p) = &cfg.output.path {
        check_target(p)?;
    }
    Ok(cfg.output.path.clone())
}

// ---------------------------------------------------------------- variance

struct VariancePlan {
    spec: KernelSpec,
    r0: f64,
    rs: Vec<f64>,
    eps: Vec<f64>,
    quad: rigidity_lab::QuadSettings,
    format: Format,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct VarianceOut<'a> {
    kernel: &'a KernelSpec,
    #[serde(flatten)]
    table: &'a rigidity_lab::SweepTable,
}

pub fn plan_variance(cfg: &ExperimentConfig) -> Result<Box<dyn Plan>, CliError> {
    let spec = cfg.kernel(|| IndexSet::powers(2, 12).expect("fits in u64"))?;
    let (r0, rs) = cfg.sweep(0.5, &[0.9, 0.99, 0.999])?;
    let eps = cfg.eps.clone().unwrap_or_else(|| vec![0.1, 0.01]);
    if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(CliError::field(
            "eps",
            format!("thresholds must be positive, got {e}"),
        ));
    }
    Ok(Box::new(VariancePlan {
        spec,
        r0,
        rs,
        eps,
        quad: cfg.quad()?,
        format: format(cfg, Format::Csv),
        out: out_path(cfg)?,
    }))
}

impl Plan for VariancePlan {
    fn execute(self: Box<Self>) -> Result<(), CliError> {
        let table = rigidity_sweep(&self.spec, self.r0, &self.rs, &self.eps, &self.quad)?;
        let text = match self.format {
            Format::Csv => table.to_csv(),
            Format::Json => to_json(&VarianceOut {
                kernel: &self.spec,
                table: &table,
            }),
        };
        emit(self.out.as_deref(), &text)
    }
}

// ------------------------------------------------------------------ sample

struct SamplePlan {
    spec: KernelSpec,
    samples: u64,
    seed: u64,
    radius: f64,
    bins: usize,
    format: Format,
    out: Option<PathBuf>,
    stats: Option<PathBuf>,
}

#[derive(Serialize)]
struct SampleStats<'a> {
    kernel: &'a KernelSpec,
    rank: usize,
    samples: u64,
    seed: u64,
    radius: f64,
    expected_count: f64,
    count: Moments,
    radial_gof: Option<rigidity_lab::sampler::RadialGof>,
}

pub fn plan_sample(cfg: &ExperimentConfig) -> Result<Box<dyn Plan>, CliError> {
    let spec = cfg.kernel(|| IndexSet::full(3))?;
    let samples = cfg.mc.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(CliError::field("mc.samples", "must be at least 1"));
    }
    let radius = cfg.mc.radius.unwrap_or(0.5);
    if !(0.0..1.0).contains(&radius) {
        return Err(CliError::field(
            "mc.radius",
            format!("must lie in [0, 1), got {radius}"),
        ));
    }
    let bins = cfg.mc.bins.unwrap_or(20);
    if bins < 2 {
        return Err(CliError::field(
            "mc.bins",
            format!("need at least 2, got {bins}"),
        ));
    }
    let out = out_path(cfg)?;
    let stats = match (&cfg.output.stats_path, &out) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(o)) => {
            let mut s = o.clone().into_os_string();
            s.push(".stats.json");
            Some(PathBuf::from(s))
        }
        (None, None) => None,
    };
    if let Some(p) = &stats {
        check_target(p)?;
    }
    Ok(Box::new(SamplePlan {
        spec,
        samples,
        seed: cfg.mc.seed.unwrap_or(0),
        radius,
        bins,
        format: format(cfg, Format::Csv),
        out,
        stats,
    }))
}

impl Plan for SamplePlan {
    fn execute(self: Box<Self>) -> Result<(), CliError> {
        let configs = sample_many(&self.spec, self.samples, RngState::new(self.seed))?;
        let counts: Vec<f64> = configs
            .iter()
            .map(|c| c.count_in_disc(self.radius) as f64)
            .collect();
        let total = self.samples * self.spec.rank() as u64;
        let radial_gof = if total >= 5 * self.bins as u64 {
            Some(radial_chi_square(&self.spec, &configs, self.bins, 0.01)?)
        } else {
            None
        };
        let stats = SampleStats {
            kernel: &self.spec,
            rank: self.spec.rank(),
            samples: self.samples,
            seed: self.seed,
            radius: self.radius,
            expected_count: self.spec.expected_count_in_disc(self.radius)?,
            count: Moments::from_samples(&counts),
            radial_gof,
        };
        let dump = match self.format {
            Format::Csv => samples_to_csv(&configs),
            Format::Json => to_json(&configs),
        };
        emit(self.out.as_deref(), &dump)?;
        let stats = to_json(&stats);
        match &self.stats {
            Some(p) => emit(Some(p), &stats),
            None => {
                eprint!("{stats}");
                Ok(())
            }
        }
    }
}

// ------------------------------------------------------------------- lemma

struct LemmaPlan {
    r0: f64,
    cutoffs: Vec<Cutoff>,
    quad: rigidity_lab::QuadSettings,
    format: Format,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LemmaRow {
    #[serde(flatten)]
    report: LemmaReport,
    decomposed_total: f64,
}

#[derive(Serialize)]
struct LemmaOut {
    r0: f64,
    c2: QuadResult,
    rows: Vec<LemmaRow>,
}

pub fn plan_lemma(cfg: &ExperimentConfig) -> Result<Box<dyn Plan>, CliError> {
    let (r0, rs) = cfg.sweep(0.5, &[0.9, 0.99, 0.999, 0.9999])?;
    let cutoffs = rs
        .iter()
        .map(|&r| Cutoff::new(r0, r).map_err(|e| CliError::field("cutoff", e)))
        .collect::<Result<_, _>>()?;
    Ok(Box::new(LemmaPlan {
        r0,
        cutoffs,
        quad: cfg.quad()?,
        format: format(cfg, Format::Json),
        out: out_path(cfg)?,
    }))
}

impl Plan for LemmaPlan {
    fn execute(self: Box<Self>) -> Result<(), CliError> {
        let c2 = c2_constant(&self.quad)?;
        let mut rows = Vec::with_capacity(self.cutoffs.len());
        for c in &self.cutoffs {
            let report = LemmaReport::compute(c, c2.value, &self.quad)?;
            rows.push(LemmaRow {
                decomposed_total: report.decomposed_total(),
                report,
            });
        }
        let r0 = self.r0;
        let text = match self.format {
            Format::Json => to_json(&LemmaOut { r0, c2, rows }),
            Format::Csv => {
                let mut s = String::from(
                    "r0,r,I,I_quadrature,II,III,IV,full,decomposed_total,bound_II,bound_III,bound_IV,c2\n",
                );
                for row in &rows {
                    let r = &row.report;
                    writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.r0,
                        r.r,
                        r.i,
                        r.i_quadrature.value,
                        r.ii.value,
                        r.iii.value,
                        r.iv.value,
                        r.full.value,
                        row.decomposed_total,
                        r.bound_ii,
                        r.bound_iii,
                        r.bound_iv,
                        c2.value
                    )
                    .expect("writing to a String");
                }
                s
            }
        };
        emit(self.out.as_deref(), &text)
    }
}

// --------------------------------------------------------------- decompose

struct DecomposePlan {
    lambda: IndexSet,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Piece {
    elements: IndexSet,
    /// Absent for singletons, whose ratio is unbounded.
    gap_ratio: Option<f64>,
}

#[derive(Serialize)]
struct DecomposeOut {
    input_size: usize,
    piece_count: usize,
    pieces: Vec<Piece>,
}

pub fn plan_decompose(cfg: &ExperimentConfig) -> Result<Box<dyn Plan>, CliError> {
    json_only(cfg, "decompose")?;
    Ok(Box::new(DecomposePlan {
        lambda: cfg.lambda(|| IndexSet::powers(2, 12).expect("fits in u64"))?,
        out: out_path(cfg)?,
    }))
}

impl Plan for DecomposePlan {
    fn execute(self: Box<Self>) -> Result<(), CliError> {
        let pieces = self.lambda.decompose_lacunary();
        verify_decomposition(&self.lambda, &pieces)
            .map_err(|e| CliError::Numeric(format!("decomposition failed its own check: {e}")))?;
        let pieces: Vec<Piece> = pieces
            .into_iter()
            .map(|p| Piece {
                gap_ratio: if p.len() >= 2 {
                    p.gap_ratio().ok()
                } else {
                    None
                },
                elements: p,
            })
            .collect();
        let out = DecomposeOut {
            input_size: self.lambda.len(),
            piece_count: pieces.len(),
            pieces,
        };
        emit(self.out.as_deref(), &to_json(&out))
    }
}

// --------------------------------------------------------------- bernoulli

struct BernoulliPlan {
    c: u32,
    n: u32,
    trials: u64,
    n_max: u64,
    seed: u64,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SizeSummary {
    n_max: u64,
    expected: f64,
    moments: Moments,
}

#[derive(Serialize)]
struct DrawSummary {
    seed: u64,
    n_max: u64,
    size: usize,
    /// `N_k` for `k = 0, 1, …` over every block inside the draw.
    block_counts: Vec<usize>,
    witness: rigidity_lab::random_subset::WitnessReport,
}

#[derive(Serialize)]
struct BernoulliOut {
    seed: u64,
    law: rigidity_lab::BlockLaw,
    size: SizeSummary,
    draw: DrawSummary,
}

pub fn plan_bernoulli(cfg: &ExperimentConfig) -> Result<Box<dyn Plan>, CliError> {
    json_only(cfg, "bernoulli")?;
    let b = &cfg.bernoulli;
    let c = b.c.unwrap_or(1);
    if c == 0 {
        return Err(CliError::field("bernoulli.c", "must be at least 1"));
    }
    let n = b.n.unwrap_or(12);
    if n > 40 {
        return Err(CliError::field(
            "bernoulli.n",
            format!("at most 40 supported, got {n}"),
        ));
    }
    let trials = b.trials.unwrap_or(100_000);
    if trials < 100 {
        return Err(CliError::field(
            "bernoulli.trials",
            format!("must be at least 100, got {trials}"),
        ));
    }
    Ok(Box::new(BernoulliPlan {
        c,
        n,
        trials,
        n_max: b.n_max.unwrap_or(10_000),
        seed: cfg.mc.seed.unwrap_or(0),
        out: out_path(cfg)?,
    }))
}

impl Plan for BernoulliPlan {
    fn execute(self: Box<Self>) -> Result<(), CliError> {
        let rng = RngState::new(self.seed);
        let law = empirical_block_law(self.c, self.n, self.trials, rng)?;
        let size = SizeSummary {
            n_max: self.n_max,
            expected: harmonic(self.n_max + 1),
            moments: size_moments(self.n_max, self.trials, rng),
        };
        let draw_max = self.n_max.max(1u64 << (self.n + 1));
        let d = sample_lambda(draw_max, rng);
        // largest k with 2^{k+1} ≤ draw_max
        let top = 62 - draw_max.leading_zeros();
        let draw = DrawSummary {
            seed: self.seed,
            n_max: draw_max,
            size: d.set.len(),
            block_counts: block_counts(&d, 0..=top)?,
            witness: non_lacunarity_witness(&d, self.c, 0..=top)?,
        };
        let out = BernoulliOut {
            seed: self.seed,
            law,
            size,
            draw,
        };
        emit(self.out.as_deref(), &to_json(&out))
    }
}

// ------------------------------------------------------------------- bloch

struct BlochPlan {
    lambda: IndexSet,
    caps: Vec<u64>,
    format: Format,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BlochRow {
    cap: u64,
    bloch_estimate: f64,
    /// Observed `max W_Λ(ts)(1 - t²s²)²` on the same grid; absent when no
    /// index lies below the cap.
    chain_constant: Option<f64>,
}

pub fn plan_bloch(cfg: &ExperimentConfig) -> Result<Box<dyn Plan>, CliError> {
    let caps = cfg
        .bloch
        .caps
        .clone()
        .unwrap_or_else(|| vec![1 << 10, 1 << 14, 1 << 18]);
    if caps.is_empty() {
        return Err(CliError::field("bloch.caps", "list is empty"));
    }
    if let Some(c) = caps.iter().find(|&&c| c > 1 << 24) {
        return Err(CliError::field(
            "bloch.caps",
            format!("cap {c} exceeds 2^24"),
        ));
    }
    Ok(Box::new(BlochPlan {
        lambda: cfg.lambda(|| IndexSet::powers(2, 20).expect("fits in u64"))?,
        caps,
        format: format(cfg, Format::Csv),
        out: out_path(cfg)?,
    }))
}

impl Plan for BlochPlan {
    fn execute(self: Box<Self>) -> Result<(), CliError> {
        let mut rows = Vec::with_capacity(self.caps.len());
        for &cap in &self.caps {
            let grid = default_bloch_grid(cap);
            let chain_constant = match KernelSpec::new(self.lambda.clone(), cap) {
                Ok(spec) => Some(spec.bloch_chain_constant(&grid)?),
                Err(_) => None,
            };
            rows.push(BlochRow {
                cap,
                bloch_estimate: self.lambda.bloch_norm_estimate(cap, &grid)?,
                chain_constant,
            });
        }
        let text = match self.format {
            Format::Json => to_json(&rows),
            Format::Csv => {
                let mut s = String::from("cap,bloch_estimate,chain_constant\n");
                for r in &rows {
                    let cc = r.chain_constant.map_or(String::new(), |c| c.to_string());
                    writeln!(s, "{},{},{}", r.cap, r.bloch_estimate, cc)
                        .expect("writing to a String");
                }
                s
            }
        };
        emit(self.out.as_deref(), &text)
    }
}
