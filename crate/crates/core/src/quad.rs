//! Adaptive Gauss–Legendre quadrature on intervals and rectangles.
//!
//! Both integrators take an initial partition (breakpoints) and refine the cells
//! with the largest error estimates first. A cell's value is the high-order
//! tensor Gauss–Legendre rule; its error estimate is the difference to a
//! low-order rule on the same cell.
//!
//! Refinement proceeds in fixed-size batches chosen from a deterministic
//! priority order, and the final value is a compensated sum over cells in
//! creation order. Batches are evaluated in parallel, but the partition and the
//! result are the same for any number of threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sum::Neumaier;

/// Tolerances and budget for an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadSettings {
    /// Absolute error target.
    pub abs_tol: f64,
    /// Relative error target; convergence is declared when the error estimate
    /// is below `max(abs_tol, rel_tol * |value|)`.
    pub rel_tol: f64,
    /// Maximum number of integrand evaluations per integral.
    pub max_evals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-10,
            max_evals: 1_000_000,
        }
    }
}

impl QuadSettings {
    pub fn with_abs_tol(self, abs_tol: f64) -> Self {
        Self { abs_tol, ..self }
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn with_max_evals(self, max_evals: usize) -> Self {
        Self { max_evals, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol >= 0.0
            && self.rel_tol >= 0.0
            && (self.abs_tol > 0.0 || self.rel_tol > 0.0)
            && self.abs_tol.is_finite()
            && self.rel_tol.is_finite();
        if !ok {
            return Err(LabError::InvalidArgument(format!(
                "quadrature tolerances must be finite, non-negative and not both zero \
                 (abs_tol = {}, rel_tol = {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_evals == 0 {
            return Err(LabError::InvalidArgument(
                "quadrature evaluation budget must be positive".into(),
            ));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Value of an integral with its error estimate and cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            abs_error_estimate: 0.0,
            evaluations: 0,
        }
    }

    /// Scales value and error by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            abs_error_estimate: self.abs_error_estimate * factor.abs(),
            evaluations: self.evaluations,
        }
    }

    /// Sum of two results; errors and evaluation counts add.
    pub fn plus(self, other: QuadResult) -> Self {
        Self {
            value: self.value + other.value,
            abs_error_estimate: self.abs_error_estimate + other.abs_error_estimate,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Neumaier::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * x));
        }
        half * acc.total()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

const HIGH_1D: usize = 15;
const LOW_1D: usize = 7;
const HIGH_2D: usize = 9;
const LOW_2D: usize = 5;
const BATCH: usize = 16;

fn rule(n: usize) -> &'static GaussLegendre {
    static R5: OnceLock<GaussLegendre> = OnceLock::new();
    static R7: OnceLock<GaussLegendre> = OnceLock::new();
    static R9: OnceLock<GaussLegendre> = OnceLock::new();
    static R15: OnceLock<GaussLegendre> = OnceLock::new();
    let cell = match n {
        5 => &R5,
        7 => &R7,
        9 => &R9,
        15 => &R15,
        _ => unreachable!("rule order {n} is not cached"),
    };
    cell.get_or_init(|| GaussLegendre::new(n))
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    lo: [f64; 2],
    hi: [f64; 2],
    value: f64,
    err: f64,
}

impl Cell {
    fn splittable(&self, dims: usize) -> bool {
        (0..dims).any(|d| {
            let w = self.hi[d] - self.lo[d];
            w > 1e-13 * (1.0 + self.lo[d].abs())
        })
    }
}

#[derive(Debug, PartialEq)]
struct Ranked {
    err: f64,
    id: usize,
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn eval_cell_1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Cell {
    let high = rule(HIGH_1D).integrate(f, a, b);
    let low = rule(LOW_1D).integrate(f, a, b);
    Cell {
        lo: [a, 0.0],
        hi: [b, 0.0],
        value: high,
        err: (high - low).abs(),
    }
}

fn tensor<F: Fn(f64, f64) -> f64>(f: &F, g: &GaussLegendre, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let hx = 0.5 * (hi[0] - lo[0]);
    let mx = 0.5 * (hi[0] + lo[0]);
    let hy = 0.5 * (hi[1] - lo[1]);
    let my = 0.5 * (hi[1] + lo[1]);
    let mut acc = Neumaier::new();
    for (xi, wi) in g.nodes().iter().zip(g.weights()) {
        let x = mx + hx * xi;
        for (yj, wj) in g.nodes().iter().zip(g.weights()) {
            acc.add(wi * wj * f(x, my + hy * yj));
        }
    }
    hx * hy * acc.total()
}

fn eval_cell_2d<F: Fn(f64, f64) -> f64>(f: &F, lo: [f64; 2], hi: [f64; 2]) -> Cell {
    let high = tensor(f, rule(HIGH_2D), lo, hi);
    let low = tensor(f, rule(LOW_2D), lo, hi);
    Cell {
        lo,
        hi,
        value: high,
        err: (high - low).abs(),
    }
}

fn check_breaks(breaks: &[f64], axis: &str) -> Result<()> {
    if breaks.len() < 2 {
        return Err(LabError::InvalidArgument(format!(
            "{axis}: need at least two breakpoints"
        )));
    }
    if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::InvalidArgument(format!(
            "{axis}: breakpoints must be finite and strictly increasing: {breaks:?}"
        )));
    }
    Ok(())
}

/// Shared refinement loop. `split` produces the children of a cell, already evaluated.
fn refine<S>(
    mut cells: Vec<Cell>,
    cost_per_cell: usize,
    children_per_split: usize,
    dims: usize,
    settings: &QuadSettings,
    split: S,
) -> Result<QuadResult>
where
    S: Fn(&Cell) -> Vec<Cell> + Sync,
{
    let mut evaluations = cells.len() * cost_per_cell;
    let mut alive = vec![true; cells.len()];
    let mut heap: BinaryHeap<Ranked> = cells
        .iter()
        .enumerate()
        .map(|(id, c)| Ranked { err: c.err, id })
        .collect();
    let mut value: f64 = cells.iter().map(|c| c.value).sum();
    let mut err: f64 = cells.iter().map(|c| c.err).sum();
    let mut rounds = 0usize;

    loop {
        if err <= settings.target(value) {
            break;
        }
        let batch_cost = BATCH * children_per_split * cost_per_cell;
        if evaluations + batch_cost > settings.max_evals {
            let partial = summarize(&cells, &alive, evaluations);
            if partial.abs_error_estimate <= settings.target(partial.value) {
                return Ok(partial);
            }
            return Err(LabError::NonConvergence(partial));
        }
        let mut batch = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            match heap.pop() {
                Some(r) if cells[r.id].splittable(dims) => batch.push(r.id),
                Some(_) => continue,
                None => break,
            }
        }
        if batch.is_empty() {
            // Nothing left to split: the error is at the resolution floor.
            break;
        }
        let children: Vec<Vec<Cell>> = batch.par_iter().map(|&id| split(&cells[id])).collect();
        for (&id, kids) in batch.iter().zip(children) {
            alive[id] = false;
            value -= cells[id].value;
            err -= cells[id].err;
            for kid in kids {
                value += kid.value;
                err += kid.err;
                evaluations += cost_per_cell;
                heap.push(Ranked {
                    err: kid.err,
                    id: cells.len(),
                });
                cells.push(kid);
                alive.push(true);
            }
        }
        rounds += 1;
        if rounds.is_multiple_of(32) {
            let exact = summarize(&cells, &alive, evaluations);
            value = exact.value;
            err = exact.abs_error_estimate;
        }
    }
    Ok(summarize(&cells, &alive, evaluations))
}

fn summarize(cells: &[Cell], alive: &[bool], evaluations: usize) -> QuadResult {
    let mut value = Neumaier::new();
    let mut err = Neumaier::new();
    for (c, _) in cells.iter().zip(alive).filter(|(_, &a)| a) {
        value.add(c.value);
        err.add(c.err);
    }
    QuadResult {
        value: value.total(),
        abs_error_estimate: err.total(),
        evaluations,
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from the given partition.
pub fn integrate_1d<F>(f: F, breaks: &[f64], settings: &QuadSettings) -> Result<QuadResult>
where
    F: Fn(f64) -> f64 + Sync,
{
    settings.validate()?;
    check_breaks(breaks, "breaks")?;
    let cells: Vec<Cell> = breaks
        .par_windows(2)
        .map(|w| eval_cell_1d(&f, w[0], w[1]))
        .collect();
    refine(cells, HIGH_1D + LOW_1D, 2, 1, settings, |c| {
        let mid = 0.5 * (c.lo[0] + c.hi[0]);
        vec![
            eval_cell_1d(&f, c.lo[0], mid),
            eval_cell_1d(&f, mid, c.hi[0]),
        ]
    })
}

/// Integrates `f(x, y)` over the rectangle spanned by the two breakpoint lists.
///
/// The initial partition is the tensor grid of the breakpoints; place them on
/// every discontinuity and kink of the integrand.
pub fn integrate_2d<F>(
    f: F,
    xbreaks: &[f64],
    ybreaks: &[f64],
    settings: &QuadSettings,
) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    settings.validate()?;
    check_breaks(xbreaks, "x breaks")?;
    check_breaks(ybreaks, "y breaks")?;
    let mut boxes = Vec::new();
    for xw in xbreaks.windows(2) {
        for yw in ybreaks.windows(2) {
            boxes.push(([xw[0], yw[0]], [xw[1], yw[1]]));
        }
    }
    let cells: Vec<Cell> = boxes
        .par_iter()
        .map(|&(lo, hi)| eval_cell_2d(&f, lo, hi))
        .collect();
    let cost = HIGH_2D * HIGH_2D + LOW_2D * LOW_2D;
    refine(cells, cost, 4, 2, settings, |c| {
        let mx = 0.5 * (c.lo[0] + c.hi[0]);
        let my = 0.5 * (c.lo[1] + c.hi[1]);
        vec![
            eval_cell_2d(&f, [c.lo[0], c.lo[1]], [mx, my]),
            eval_cell_2d(&f, [mx, c.lo[1]], [c.hi[0], my]),
            eval_cell_2d(&f, [c.lo[0], my], [mx, c.hi[1]]),
            eval_cell_2d(&f, [mx, my], [c.hi[0], c.hi[1]]),
        ]
    })
}

/// Refines a partition of `[0, 1]` geometrically toward every breakpoint.
///
/// Near a radius `x` the natural length scale of disc integrands is `1 - x`
/// (the hyperbolic scale), so each interval `[a, b]` is subdivided by halving
/// toward `a` until the gap is below `(1 - a) / 2`, and toward `b` until it is
/// below `(1 - b) / 2`. The result is sorted, deduplicated and contains the
/// input breakpoints.
pub fn hyperbolic_breaks(breaks: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = breaks.to_vec();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut gap = 0.5 * (b - a);
        while gap > 0.5 * (1.0 - a) {
            out.push(a + gap);
            gap *= 0.5;
        }
        if b < 1.0 {
            let mut gap = 0.5 * (b - a);
            while gap > 0.5 * (1.0 - b) {
                out.push(b - gap);
                gap *= 0.5;
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    out
}
