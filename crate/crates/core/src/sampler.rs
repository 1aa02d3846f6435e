//! Exact sampling of the projection DPP with kernel `K_Λ`.
//!
//! The sequential scheme picks points one at a time. With `j` points chosen,
//! the next one has density `‖P_j v(z)‖² / (N - j)`, where `v(z)` is the
//! vector of basis values and `P_j` projects away from the span of the chosen
//! `v(x_i)`. Proposals come from the intensity `K(z,z)/N` and are accepted
//! with probability `‖P_j v(z)‖² / ‖v(z)‖²`, so the expected number of
//! proposals for a full sample is `N·H_N`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{LabError, Result};
use crate::kernel::KernelSpec;
use crate::rng::{LabRng, RngState};
use crate::stats::Moments;
use crate::variance::RadialStatistic;

const BISECTION_TOL: f64 = 1e-12;
const REORTHOGONALIZE_BELOW: f64 = 1e-8;
const PROJECTION_SLACK: f64 = 1e-9;
const MAX_PROPOSALS_PER_POINT: u64 = 10_000_000;

/// A finite point configuration in the open disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<Complex64>,
}

impl Configuration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `#{x : |x| ≤ r}`.
    pub fn count_in_disc(&self, r: f64) -> usize {
        self.points.iter().filter(|z| z.norm() <= r).count()
    }

    /// `S_φ(X) = Σ φ(|x|)`.
    pub fn linear_stat(&self, phi: &RadialStatistic) -> f64 {
        self.points.iter().map(|z| phi.eval(z.norm())).sum()
    }
}

/// Normalized radial counting function `F(r) = E#{|z| ≤ r} / N`.
fn radial_cdf(spec: &KernelSpec, r: f64) -> f64 {
    let r2 = r * r;
    let mut acc = crate::sum::Neumaier::new();
    let mut power = r2;
    let mut prev = 0u64;
    for &n in spec.exponents() {
        power *= crate::indexset::pow_u64(r2, n - prev);
        prev = n;
        acc.add(power);
    }
    acc.total() / spec.rank() as f64
}

/// Radius `r` with `F(r) = u`, by bisection on `[0, 1]`.
pub fn inverse_radial_cdf(spec: &KernelSpec, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if radial_cdf(spec, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // ⟨b, a⟩ = Σ a_n conj(b_n)
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

fn project_out(v: &mut [Complex64], frame: &[Vec<Complex64>]) {
    for e in frame {
        let c = dot(v, e);
        for (x, y) in v.iter_mut().zip(e) {
            *x -= c * y;
        }
    }
}

/// Draws one configuration, consuming `rng`.
///
/// Each proposal uses three uniforms in order: radius, angle, acceptance.
pub fn sample_dpp(spec: &KernelSpec, rng: &mut LabRng) -> Result<Configuration> {
    let n = spec.rank();
    let mut frame: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            if proposals > MAX_PROPOSALS_PER_POINT {
                return Err(LabError::NumericAnomaly(format!(
                    "no proposal accepted for point {} of {n} after {MAX_PROPOSALS_PER_POINT} tries",
                    points.len() + 1
                )));
            }
            let r = inverse_radial_cdf(spec, rng.random::<f64>());
            let theta = TAU * rng.random::<f64>();
            let accept_u: f64 = rng.random();
            let z = Complex64::from_polar(r, theta);
            let mut v = spec.basis_at(z);
            let full = norm_sqr(&v);
            if full == 0.0 {
                continue;
            }
            project_out(&mut v, &frame);
            let mut resid = norm_sqr(&v);
            if resid < REORTHOGONALIZE_BELOW * REORTHOGONALIZE_BELOW * full {
                project_out(&mut v, &frame);
                resid = norm_sqr(&v);
            }
            if resid.is_nan() || resid > full * (1.0 + PROJECTION_SLACK) {
                return Err(LabError::NumericAnomaly(format!(
                    "residual {resid} exceeds K(z,z) = {full} at z = {z}"
                )));
            }
            if accept_u * full < resid {
                let norm = resid.sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(LabError::NumericAnomaly(format!(
                        "degenerate evaluation vector at z = {z}"
                    )));
                }
                for x in v.iter_mut() {
                    *x /= norm;
                }
                frame.push(v);
                points.push(z);
                break;
            }
        }
    }
    Ok(Configuration { points })
}

/// Configuration number `index` of the stream family keyed by `rng.seed`.
pub fn sample_indexed(spec: &KernelSpec, rng: RngState, index: u64) -> Result<Configuration> {
    sample_dpp(spec, &mut rng.with_stream(index).rng())
}

/// `count` configurations, sample `i` drawn on stream `i`.
pub fn sample_many(spec: &KernelSpec, count: u64, rng: RngState) -> Result<Vec<Configuration>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_indexed(spec, rng, i))
        .collect()
}

fn mc_map<F>(spec: &KernelSpec, n_samples: u64, rng: RngState, f: F) -> Result<Moments>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    let xs: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| sample_indexed(spec, rng, i).map(|c| f(&c)))
        .collect::<Result<_>>()?;
    Ok(Moments::from_samples(&xs))
}

/// Moments of `#{|z| ≤ r}`.
pub fn mc_count_stats(spec: &KernelSpec, r: f64, n_samples: u64, rng: RngState) -> Result<Moments> {
    if !(0.0..1.0).contains(&r) {
        return Err(LabError::Domain(format!(
            "radius must lie in [0, 1), got {r}"
        )));
    }
    mc_map(spec, n_samples, rng, |c| c.count_in_disc(r) as f64)
}

/// Moments of `S_φ`.
pub fn mc_linear_stat(
    spec: &KernelSpec,
    phi: &RadialStatistic,
    n_samples: u64,
    rng: RngState,
) -> Result<Moments> {
    mc_map(spec, n_samples, rng, |c| c.linear_stat(phi))
}

/// Chi-square comparison of pooled radii with the radial density
/// `2t·K(t,t)/N`, on bins of equal expected mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGof {
    pub edges: Vec<f64>,
    pub observed: Vec<u64>,
    pub expected: f64,
    pub statistic: f64,
    pub p_value: f64,
    /// Smallest per-bin two-sided p-value, multiplied by the number of bins.
    pub bonferroni_p: f64,
    pub alpha: f64,
    pub passed: bool,
}

pub fn radial_chi_square(
    spec: &KernelSpec,
    samples: &[Configuration],
    bins: usize,
    alpha: f64,
) -> Result<RadialGof> {
    if bins < 2 {
        return Err(LabError::InvalidArgument(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    let mut edges: Vec<f64> = (0..=bins)
        .map(|k| inverse_radial_cdf(spec, k as f64 / bins as f64))
        .collect();
    edges[0] = 0.0;
    edges[bins] = 1.0;
    let mut observed = vec![0u64; bins];
    let mut total = 0u64;
    for c in samples {
        for z in &c.points {
            let r = z.norm();
            let k = edges[1..bins].partition_point(|&e| e < r);
            observed[k] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(LabError::InvalidArgument("no points to test".into()));
    }
    let expected = total as f64 / bins as f64;
    let statistic: f64 = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let chi = ChiSquared::new((bins - 1) as f64).expect("positive degrees of freedom");
    let p_value = chi.sf(statistic);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_bin = 1.0 / bins as f64;
    let sd = (total as f64 * p_bin * (1.0 - p_bin)).sqrt();
    let min_p = observed
        .iter()
        .map(|&o| 2.0 * normal.sf((o as f64 - expected).abs() / sd))
        .fold(1.0f64, f64::min);
    let bonferroni_p = (min_p * bins as f64).min(1.0);
    Ok(RadialGof {
        edges,
        observed,
        expected,
        statistic,
        p_value,
        bonferroni_p,
        alpha,
        passed: p_value >= alpha && bonferroni_p >= alpha,
    })
}

/// CSV dump with header `sample_id,point_index,re,im`.
pub fn samples_to_csv(samples: &[Configuration]) -> String {
    let mut out = String::from("sample_id,point_index,re,im\n");
    for (i, c) in samples.iter().enumerate() {
        for (j, z) in c.points.iter().enumerate() {
            writeln!(out, "{i},{j},{},{}", z.re, z.im).expect("writing to a String");
        }
    }
    out
}
