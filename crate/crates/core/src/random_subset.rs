//! The random index set `Λ_ξ = {n : ξ_n = 1}` with independent
//! `ξ_n ~ Bernoulli(1/(n+1))`, and its dyadic block counts.
//!
//! Blocks here are `(2ⁿ, 2ⁿ⁺¹]`, closed on the right. The
//! [`IndexSet::dyadic_block_counts`] convention is `[2ⁿ, 2ⁿ⁺¹)`.
//!
//! `N_n = Σ_{k∈(2ⁿ,2ⁿ⁺¹]} ξ_k` is a Poisson-binomial variable with mean
//! `Σ 1/(k+1) → log 2`, so its law tends to Poisson(log 2) and
//! `P[N_n = C] → (log 2)^C / (2·C!)`. The constant `1/(2^C C! e)` is only the
//! limit of a lower bound for that probability. [`BlockLaw`] reports both next
//! to the exact finite-`n` probability.

use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::indexset::IndexSet;
use crate::rng::RngState;
use crate::stats::Moments;
use crate::sum::Neumaier;

/// One realization of `Λ_ξ ∩ [0, n_max]`.
///
/// Serializes as `{"lambda": [...], "seed": s, "stream": k, "n_max": N}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliDraw {
    #[serde(rename = "lambda")]
    pub set: IndexSet,
    #[serde(flatten)]
    pub rng: RngState,
    pub n_max: u64,
}

/// Draws `ξ_0, …, ξ_{n_max}` in index order, one uniform variate each.
pub fn sample_lambda(n_max: u64, rng: RngState) -> BernoulliDraw {
    let mut g = rng.rng();
    let mut out = Vec::new();
    for n in 0..=n_max {
        let u: f64 = g.random();
        if u * ((n + 1) as f64) < 1.0 {
            out.push(n);
        }
    }
    BernoulliDraw {
        set: IndexSet::new(out).expect("generated in increasing order"),
        rng,
        n_max,
    }
}

/// `H_m = Σ_{k=1}^{m} 1/k`, the expected size of `Λ_ξ ∩ [0, m-1]`.
pub fn harmonic(m: u64) -> f64 {
    (1..=m)
        .rev()
        .map(|k| 1.0 / k as f64)
        .collect::<Neumaier>()
        .total()
}

fn block_range(n: u32) -> Result<(u64, u64)> {
    if n >= 63 {
        return Err(LabError::InvalidArgument(format!(
            "block index {n} overflows u64"
        )));
    }
    Ok((1u64 << n, 1u64 << (n + 1)))
}

/// Counts of `set` in the blocks `(2ⁿ, 2ⁿ⁺¹]` for `n` in `range`, given that
/// `set` is known on `[0, n_max]`.
pub fn block_counts_of(
    set: &IndexSet,
    n_max: u64,
    range: RangeInclusive<u32>,
) -> Result<Vec<usize>> {
    let hi = *range.end();
    let (_, top) = block_range(hi)?;
    if top > n_max {
        return Err(LabError::InvalidArgument(format!(
            "block {hi} ends at {top}, beyond the drawn range n_max = {n_max}"
        )));
    }
    let e = set.elements();
    range
        .map(|n| {
            let (a, b) = block_range(n)?;
            let lo = e.partition_point(|&k| k <= a);
            let up = e.partition_point(|&k| k <= b);
            Ok(up - lo)
        })
        .collect()
}

/// `N_n` for each `n` in `range`. Requires `2^{max(range)+1} ≤ n_max`.
pub fn block_counts(d: &BernoulliDraw, range: RangeInclusive<u32>) -> Result<Vec<usize>> {
    block_counts_of(&d.set, d.n_max, range)
}

/// Probability that `N_n = j` for `j = 0..=c_max`, by dynamic programming over
/// the block.
pub fn block_count_distribution(n: u32, c_max: usize) -> Result<Vec<f64>> {
    let (a, b) = block_range(n)?;
    let mut p = vec![0.0; c_max + 1];
    p[0] = 1.0;
    for k in a + 1..=b {
        let q = 1.0 / (k + 1) as f64;
        for j in (0..=c_max).rev() {
            let stay = p[j] * (1.0 - q);
            let step = if j > 0 { p[j - 1] * q } else { 0.0 };
            p[j] = stay + step;
        }
    }
    Ok(p)
}

fn factorial(c: u32) -> f64 {
    (1..=c).map(f64::from).product()
}

/// Empirical law of one block count against its reference constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLaw {
    pub c: u32,
    pub n: u32,
    pub trials: u64,
    pub rng: RngState,
    pub count_eq: u64,
    pub count_ge: u64,
    pub freq_eq: f64,
    pub freq_ge: f64,
    pub std_error_eq: f64,
    pub std_error_ge: f64,
    /// `1/(2^C C! e)`, the limit of the lower bound for `P[N_n = C]`.
    pub lower_bound_limit: f64,
    /// `(log 2)^C / (2·C!)`, the limit of `P[N_n = C]`.
    pub poisson_limit: f64,
    /// Exact `P[N_n = C]` at this `n`.
    pub exact_eq: f64,
    /// Exact `P[N_n ≥ C]` at this `n`.
    pub exact_ge: f64,
}

/// Frequencies of `{N_n = C}` and `{N_n ≥ C}` over `trials` independent
/// draws. Trial `i` draws `Λ_ξ ∩ [0, 2ⁿ⁺¹]` on stream `i` of `rng.seed`.
pub fn empirical_block_law(c: u32, n: u32, trials: u64, rng: RngState) -> Result<BlockLaw> {
    if trials < 100 {
        return Err(LabError::InvalidArgument(format!(
            "trials must be at least 100, got {trials}"
        )));
    }
    let (_, top) = block_range(n)?;
    let counts: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let d = sample_lambda(top, rng.with_stream(i));
            block_counts(&d, n..=n).map(|v| v[0])
        })
        .collect::<Result<_>>()?;
    let count_eq = counts.iter().filter(|&&k| k == c as usize).count() as u64;
    let count_ge = counts.iter().filter(|&&k| k >= c as usize).count() as u64;
    let t = trials as f64;
    let (fe, fg) = (count_eq as f64 / t, count_ge as f64 / t);
    let dist = block_count_distribution(n, c as usize)?;
    let below: f64 = dist[..c as usize].iter().sum();
    let inv = 1.0 / (2f64.powi(c as i32) * factorial(c));
    let poisson_limit = std::f64::consts::LN_2.powi(c as i32) / (2.0 * factorial(c));
    Ok(BlockLaw {
        c,
        n,
        trials,
        rng,
        count_eq,
        count_ge,
        freq_eq: fe,
        freq_ge: fg,
        std_error_eq: (fe * (1.0 - fe) / t).sqrt(),
        std_error_ge: (fg * (1.0 - fg) / t).sqrt(),
        lower_bound_limit: inv / std::f64::consts::E,
        poisson_limit,
        exact_eq: dist[c as usize],
        exact_ge: (1.0 - below).max(0.0),
    })
}

/// Moments of `|Λ_ξ ∩ [0, n_max]|` over `draws` independent draws.
pub fn size_moments(n_max: u64, draws: u64, rng: RngState) -> Moments {
    let sizes: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| sample_lambda(n_max, rng.with_stream(i)).set.len() as f64)
        .collect();
    Moments::from_samples(&sizes)
}

/// Blocks with `N_n ≥ C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub c: u32,
    pub witness: bool,
    /// `(n, N_n)` for every qualifying block.
    pub blocks: Vec<(u32, usize)>,
}

/// Whether some block `(2ⁿ, 2ⁿ⁺¹]` with `n` in `range` holds at least `c`
/// elements of `set`.
pub fn witness_in(
    set: &IndexSet,
    n_max: u64,
    c: u32,
    range: RangeInclusive<u32>,
) -> Result<WitnessReport> {
    let start = *range.start();
    let counts = block_counts_of(set, n_max, range)?;
    let blocks: Vec<(u32, usize)> = counts
        .into_iter()
        .enumerate()
        .filter(|&(_, k)| k >= c as usize)
        .map(|(i, k)| (start + i as u32, k))
        .collect();
    Ok(WitnessReport {
        c,
        witness: !blocks.is_empty(),
        blocks,
    })
}

pub fn non_lacunarity_witness(
    d: &BernoulliDraw,
    c: u32,
    range: RangeInclusive<u32>,
) -> Result<WitnessReport> {
    witness_in(&d.set, d.n_max, c, range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_always_included_and_deterministic() {
        for s in 0..50 {
            let d = sample_lambda(100, RngState::new(s));
            assert!(d.set.contains(0));
            assert_eq!(d, sample_lambda(100, RngState::new(s)));
        }
        assert_eq!(sample_lambda(0, RngState::new(3)).set.elements(), &[0]);
    }

    #[test]
    fn prefix_property() {
        // one uniform per index in order: a longer draw extends a shorter one
        let a = sample_lambda(1000, RngState::new(9));
        let b = sample_lambda(5000, RngState::new(9));
        assert_eq!(a.set, b.set.truncate(1000));
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        let euler_gamma = 0.577_215_664_901_532_9;
        let m = 10_001.0f64;
        let asym = m.ln() + euler_gamma + 1.0 / (2.0 * m) - 1.0 / (12.0 * m * m);
        assert!((harmonic(10_001) - asym).abs() < 1e-12);
        assert!((harmonic(10_000) - 9.787_606).abs() < 1e-6);
        assert!((harmonic(10_001) - 9.787_706).abs() < 1e-6);
    }

    #[test]
    fn per_index_density() {
        let draws = 20_000u64;
        let mut hits = [0u64; 8];
        for i in 0..draws {
            let d = sample_lambda(7, RngState::new(1).with_stream(i));
            for n in d.set.iter() {
                hits[n as usize] += 1;
            }
        }
        for (n, &h) in hits.iter().enumerate() {
            let p = 1.0 / (n + 1) as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let f = h as f64 / draws as f64;
            assert!((f - p).abs() <= 4.0 * se + 1e-12, "n={n}: {f} vs {p}");
        }
    }

    #[test]
    fn block_counts_convention_and_checks() {
        let set = IndexSet::new(vec![0, 1, 2, 3, 4, 5, 8, 9, 16]).unwrap();
        // (1,2] = {2}, (2,4] = {3,4}, (4,8] = {5,8}, (8,16] = {9,16}
        assert_eq!(
            block_counts_of(&set, 32, 0..=4).unwrap(),
            vec![1, 2, 2, 2, 0]
        );
        assert!(block_counts_of(&set, 31, 0..=4).is_err());
        let d = sample_lambda(1 << 12, RngState::new(4));
        let counts = block_counts(&d, 3..=11).unwrap();
        let total: usize = counts.iter().sum();
        let direct = d.set.iter().filter(|&k| k > 8 && k <= 4096).count();
        assert_eq!(total, direct);
        for (i, &k) in counts.iter().enumerate() {
            assert!(k <= 1 << (3 + i));
        }
    }

    #[test]
    fn block_distribution_sums_and_mean() {
        let p = block_count_distribution(10, 40).unwrap();
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let mean: f64 = p.iter().enumerate().map(|(j, q)| j as f64 * q).sum();
        let exact = harmonic(2049) - harmonic(1025);
        assert!((mean - exact).abs() < 1e-12);
        assert!((mean - std::f64::consts::LN_2).abs() < 1e-3);
    }

    #[test]
    fn block_law_reference_values() {
        let law = empirical_block_law(1, 12, 1000, RngState::new(5)).unwrap();
        assert!(law.freq_ge >= law.freq_eq);
        assert!((law.lower_bound_limit - 1.0 / (2.0 * std::f64::consts::E)).abs() < 1e-15);
        // Poisson(log 2) at 1 is log 2 / 2
        assert!((law.exact_eq - std::f64::consts::LN_2 / 2.0).abs() < 1e-3);
        assert!(empirical_block_law(1, 12, 99, RngState::new(5)).is_err());
        let big = empirical_block_law(9, 1, 100, RngState::new(5)).unwrap();
        assert_eq!(big.count_eq, 0);
        assert_eq!(big.exact_eq, 0.0);
    }

    #[test]
    fn witness_examples() {
        let powers = IndexSet::powers(2, 20).unwrap();
        assert!(!witness_in(&powers, 1 << 20, 2, 0..=19).unwrap().witness);
        assert!(witness_in(&powers, 1 << 20, 1, 0..=19).unwrap().witness);
        let d = sample_lambda(1 << 20, RngState::new(2));
        let w = non_lacunarity_witness(&d, 1, 0..=19).unwrap();
        assert!(w.witness);
        assert!(w.blocks.iter().all(|&(_, k)| k >= 1));
        let none = non_lacunarity_witness(&d, 3, 0..=0).unwrap();
        assert!(!none.witness);
    }

    #[test]
    fn draw_serialization() {
        let d = sample_lambda(20, RngState::new(8));
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["seed"], 8);
        assert_eq!(v["n_max"], 20);
        assert_eq!(v["lambda"][0], 0);
        let back: BernoulliDraw = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
    }
}
