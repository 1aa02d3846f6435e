//! Finite truncations of index sets Λ ⊂ ℕ.
//!
//! Besides the container itself this module holds the gap-ratio analysis,
//! dyadic block counts, the constructive splitting of Λ into sets with
//! consecutive ratios at least 2, and a grid estimate of the Bloch norm of
//! `f_Λ(z) = Σ_{n∈Λ} zⁿ`.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{LabError, Result};
use crate::rng::RngState;
use crate::sum::Neumaier;

/// A strictly increasing finite sequence of non-negative integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<u64>);

impl IndexSet {
    /// Wraps `elements`, which must be strictly increasing.
    pub fn new(elements: Vec<u64>) -> Result<Self> {
        if let Some(w) = elements.windows(2).find(|w| w[0] >= w[1]) {
            return Err(LabError::InvalidIndexSet(format!(
                "elements must be strictly increasing, found {} followed by {}",
                w[0], w[1]
            )));
        }
        Ok(Self(elements))
    }

    /// Sorts and deduplicates arbitrary input.
    pub fn from_unsorted<I: IntoIterator<Item = u64>>(elements: I) -> Self {
        let mut v: Vec<u64> = elements.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `{0, 1, …, max}`.
    pub fn full(max: u64) -> Self {
        Self((0..=max).collect())
    }

    /// `{base^k : k = 0..=max_exp}`.
    pub fn powers(base: u64, max_exp: u32) -> Result<Self> {
        if base < 2 {
            return Err(LabError::InvalidIndexSet(format!(
                "powers need base >= 2, got {base}"
            )));
        }
        let mut v = Vec::with_capacity(max_exp as usize + 1);
        let mut p: u64 = 1;
        for k in 0..=max_exp {
            v.push(p);
            if k < max_exp {
                p = p.checked_mul(base).ok_or_else(|| {
                    LabError::InvalidIndexSet(format!("{base}^{} overflows u64", k + 1))
                })?;
            }
        }
        Ok(Self(v))
    }

    pub fn elements(&self) -> &[u64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.0.binary_search(&n).is_ok()
    }

    pub fn max(&self) -> Option<u64> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }

    /// `{n ∈ Λ : n ≤ cap}`.
    pub fn truncate(&self, cap: u64) -> Self {
        let end = self.0.partition_point(|&n| n <= cap);
        Self(self.0[..end].to_vec())
    }

    /// Minimum of consecutive ratios `λ_{k+1} / λ_k`.
    ///
    /// This is the finite stand-in for `liminf λ_{k+1}/λ_k`. Singletons have
    /// ratio `+∞`. Sets containing 0 are rejected since the ratio is undefined
    /// there; strip the 0 first.
    pub fn gap_ratio(&self) -> Result<f64> {
        match self.0.as_slice() {
            [] => Err(LabError::Domain("gap ratio of an empty set".into())),
            [0, ..] => Err(LabError::Domain(
                "gap ratio is undefined for sets containing 0".into(),
            )),
            [_] => Ok(f64::INFINITY),
            v => Ok(v
                .windows(2)
                .map(|w| w[1] as f64 / w[0] as f64)
                .fold(f64::INFINITY, f64::min)),
        }
    }

    /// Entry `n` is `|Λ ∩ [2ⁿ, 2ⁿ⁺¹)|` for `n = 0..=n_max`.
    pub fn dyadic_block_counts(&self, n_max: u32) -> Vec<usize> {
        let mut counts = vec![0usize; n_max as usize + 1];
        for &k in &self.0 {
            if k == 0 {
                continue;
            }
            let block = dyadic_block(k) as usize;
            if block <= n_max as usize {
                counts[block] += 1;
            }
        }
        counts
    }

    /// Splits Λ into disjoint pieces, each with consecutive ratios ≥ 2.
    ///
    /// The element 0 (if present) becomes its own singleton piece. The rest is
    /// split by the parity of the dyadic block index `⌊log₂ k⌋`; within a parity
    /// class the `i`-th smallest element of each block goes to piece `i`. Two
    /// elements of the same piece then sit in blocks `2m` and `2m′ ≥ 2m + 2` (or
    /// the odd analogue), so their ratio exceeds 2.
    ///
    /// A final pass merges a piece into an earlier one whenever their union
    /// still has ratio ≥ 2, so e.g. the powers of two come out as one piece.
    pub fn decompose_lacunary(&self) -> Vec<IndexSet> {
        let mut pieces: Vec<IndexSet> = Vec::new();
        if self.0.first() == Some(&0) {
            pieces.push(IndexSet(vec![0]));
        }
        let positive = self.0.iter().copied().filter(|&k| k > 0);

        // (block, rank within block) for each element, grouped by parity.
        let mut classes: [Vec<Vec<u64>>; 2] = [Vec::new(), Vec::new()];
        let mut current_block = u32::MAX;
        let mut rank = 0usize;
        for k in positive {
            let block = dyadic_block(k);
            if block != current_block {
                current_block = block;
                rank = 0;
            }
            let class = &mut classes[(block % 2) as usize];
            if class.len() <= rank {
                class.resize_with(rank + 1, Vec::new);
            }
            class[rank].push(k);
            rank += 1;
        }

        let mut lacunary: Vec<Vec<u64>> = Vec::new();
        for piece in classes.into_iter().flatten() {
            match lacunary
                .iter_mut()
                .find(|existing| merged_ratio_at_least_two(existing, &piece))
            {
                Some(existing) => {
                    let mut merged = std::mem::take(existing);
                    merged.extend_from_slice(&piece);
                    merged.sort_unstable();
                    *existing = merged;
                }
                None => lacunary.push(piece),
            }
        }
        pieces.extend(lacunary.into_iter().map(IndexSet));
        pieces
    }

    /// Lower bound for the Bloch norm of the truncated `f_Λ`.
    ///
    /// Returns `max_t (1 - t) f′_Λ(t)` over `grid`, with
    /// `f′_Λ(t) = Σ_{n∈Λ, 1≤n≤cap} n t^{n-1}`. Since the coefficients are
    /// non-negative, `|f′(z)| ≤ f′(|z|)` and the supremum over the disc equals
    /// the supremum over `[0, 1)`.
    pub fn bloch_norm_estimate(&self, cap: u64, grid: &[f64]) -> Result<f64> {
        if grid.is_empty() {
            return Err(LabError::InvalidArgument("Bloch grid is empty".into()));
        }
        if let Some(&t) = grid.iter().find(|&&t| !(0.0..1.0).contains(&t)) {
            return Err(LabError::Domain(format!(
                "Bloch grid point {t} is outside [0, 1)"
            )));
        }
        let exps: Vec<u64> = self.truncate(cap).iter().filter(|&n| n >= 1).collect();
        let mut best = 0.0f64;
        for &t in grid {
            best = best.max((1.0 - t) * derivative_at(&exps, t));
        }
        Ok(best)
    }
}

/// `t_j = 1 - 2^{-j/4}` for `j = 0..=4·⌈log₂ cap⌉ + 8`.
pub fn default_bloch_grid(cap: u64) -> Vec<f64> {
    let log2 = if cap <= 1 {
        0
    } else {
        64 - (cap - 1).leading_zeros()
    };
    let j_max = 4 * log2 as usize + 8;
    (0..=j_max)
        .map(|j| 1.0 - (-(j as f64) / 4.0).exp2())
        .collect()
}

fn derivative_at(exps: &[u64], t: f64) -> f64 {
    let mut acc = Neumaier::new();
    let mut power = 1.0; // t^(n-1)
    let mut prev = 1u64;
    for &n in exps {
        power *= pow_u64(t, n - prev);
        prev = n;
        if power == 0.0 {
            break;
        }
        acc.add(n as f64 * power);
    }
    acc.total()
}

pub(crate) fn pow_u64(x: f64, n: u64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        n if n <= i32::MAX as u64 => x.powi(n as i32),
        n => x.powf(n as f64),
    }
}

/// `⌊log₂ k⌋` for `k ≥ 1`.
fn dyadic_block(k: u64) -> u32 {
    63 - k.leading_zeros()
}

fn merged_ratio_at_least_two(a: &[u64], b: &[u64]) -> bool {
    let mut merged: Vec<u64> = a.iter().chain(b).copied().collect();
    merged.sort_unstable();
    merged.windows(2).all(|w| w[0] <= w[1] / 2)
}

/// Checks the postconditions of [`IndexSet::decompose_lacunary`] by brute force.
///
/// The pieces must be pairwise disjoint, their union must equal `input`, and
/// each piece with at least two elements must have gap ratio ≥ 2 (so 0 may
/// only appear as a singleton).
pub fn verify_decomposition(input: &IndexSet, pieces: &[IndexSet]) -> Result<()> {
    let mut all: Vec<u64> = pieces.iter().flat_map(|p| p.iter()).collect();
    let total = all.len();
    all.sort_unstable();
    all.dedup();
    if all.len() != total {
        return Err(LabError::InvalidIndexSet("pieces are not disjoint".into()));
    }
    if all != input.0 {
        return Err(LabError::InvalidIndexSet(
            "union of pieces differs from the input".into(),
        ));
    }
    for (i, p) in pieces.iter().enumerate() {
        if p.is_empty() {
            return Err(LabError::InvalidIndexSet(format!("piece {i} is empty")));
        }
        if p.len() < 2 {
            continue;
        }
        if !p.gap_ratio().is_ok_and(|r| r >= 2.0) {
            return Err(LabError::InvalidIndexSet(format!(
                "piece {i} has gap ratio below 2: {:?}",
                p.0
            )));
        }
    }
    Ok(())
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u64>::deserialize(deserializer)?;
        IndexSet::new(v).map_err(serde::de::Error::custom)
    }
}

/// Index set as written in configuration files: either an explicit array or a
/// generator description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexSetForm {
    Array(IndexSet),
    Generator(IndexSetGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexSetGenerator {
    Full { max: u64 },
    Powers { base: u64, max_exp: u32 },
    Explicit { elements: IndexSet },
    Bernoulli { max: u64, seed: u64 },
}

impl IndexSetForm {
    pub fn resolve(&self) -> Result<IndexSet> {
        match self {
            IndexSetForm::Array(s) => Ok(s.clone()),
            IndexSetForm::Generator(IndexSetGenerator::Full { max }) => Ok(IndexSet::full(*max)),
            IndexSetForm::Generator(IndexSetGenerator::Powers { base, max_exp }) => {
                IndexSet::powers(*base, *max_exp)
            }
            IndexSetForm::Generator(IndexSetGenerator::Explicit { elements }) => {
                Ok(elements.clone())
            }
            IndexSetForm::Generator(IndexSetGenerator::Bernoulli { max, seed }) => {
                Ok(crate::random_subset::sample_lambda(*max, RngState::new(*seed)).set)
            }
        }
    }
}

impl From<IndexSet> for IndexSetForm {
    fn from(s: IndexSet) -> Self {
        IndexSetForm::Array(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[u64]) -> IndexSet {
        IndexSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_increasing() {
        assert!(IndexSet::new(vec![1, 1]).is_err());
        assert!(IndexSet::new(vec![3, 2]).is_err());
        assert!(IndexSet::new(vec![]).is_ok());
    }

    #[test]
    fn gap_ratio_examples() {
        let pow2 = IndexSet::powers(2, 20).unwrap();
        assert_eq!(pow2.gap_ratio().unwrap(), 2.0);
        let dense = IndexSet::from_unsorted(1..=100);
        assert_eq!(dense.gap_ratio().unwrap(), 100.0 / 99.0);
        assert_eq!(set(&[1, 3, 9, 27]).gap_ratio().unwrap(), 3.0);
        assert_eq!(set(&[5]).gap_ratio().unwrap(), f64::INFINITY);
        assert!(matches!(set(&[0, 1]).gap_ratio(), Err(LabError::Domain(_))));
        assert!(matches!(
            IndexSet::empty().gap_ratio(),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn dyadic_counts_examples() {
        assert_eq!(
            set(&[1, 2, 3, 4, 5, 6, 7]).dyadic_block_counts(2),
            vec![1, 2, 4]
        );
        let p = IndexSet::powers(2, 5).unwrap();
        assert_eq!(p.dyadic_block_counts(5), vec![1; 6]);
        assert_eq!(IndexSet::empty().dyadic_block_counts(3), vec![0; 4]);
        // zero belongs to no block
        assert_eq!(set(&[0, 1]).dyadic_block_counts(0), vec![1]);
    }

    #[test]
    fn decompose_powers_of_two_is_one_piece() {
        let s = IndexSet::new((1..=10).map(|k| 1u64 << k).collect()).unwrap();
        let pieces = s.decompose_lacunary();
        assert_eq!(pieces, vec![s.clone()]);
        verify_decomposition(&s, &pieces).unwrap();
    }

    #[test]
    fn decompose_small_examples() {
        assert_eq!(set(&[1]).decompose_lacunary(), vec![set(&[1])]);
        let s = set(&[2, 3, 5, 7, 9, 17, 33]);
        let pieces = s.decompose_lacunary();
        verify_decomposition(&s, &pieces).unwrap();
        for p in &pieces {
            if p.len() > 1 {
                assert!(p.gap_ratio().unwrap() >= 2.0);
            }
        }
        // parity construction gives 4 pieces; merging brings it to 3
        assert_eq!(pieces.len(), 3);
    }

    #[test]
    fn decompose_extracts_zero() {
        let s = set(&[0, 1, 2, 4]);
        let pieces = s.decompose_lacunary();
        assert_eq!(pieces[0], set(&[0]));
        verify_decomposition(&s, &pieces).unwrap();
    }

    #[test]
    fn decompose_full_range_piece_count_bound() {
        let s = IndexSet::from_unsorted(1..=64);
        let pieces = s.decompose_lacunary();
        verify_decomposition(&s, &pieces).unwrap();
        let counts = s.dyadic_block_counts(7);
        let even = counts.iter().step_by(2).max().unwrap();
        let odd = counts.iter().skip(1).step_by(2).max().unwrap();
        assert!(pieces.len() <= even + odd);
    }

    #[test]
    fn empty_decomposes_to_nothing() {
        assert!(IndexSet::empty().decompose_lacunary().is_empty());
    }

    #[test]
    fn verifier_catches_bad_pieces() {
        let s = set(&[1, 2, 3]);
        assert!(verify_decomposition(&s, &[set(&[1, 2, 3])]).is_err());
        assert!(verify_decomposition(&s, &[set(&[1, 2]), set(&[2, 3])]).is_err());
        assert!(verify_decomposition(&s, &[set(&[1, 2])]).is_err());
        assert!(verify_decomposition(&s, &[set(&[1, 2]), set(&[3])]).is_ok());
    }

    #[test]
    fn bloch_estimate_examples() {
        let grid = default_bloch_grid(1 << 20);
        assert_eq!(set(&[0]).bloch_norm_estimate(10, &grid).unwrap(), 0.0);

        let pow2 = IndexSet::powers(2, 20).unwrap();
        let v = pow2.bloch_norm_estimate(1 << 20, &grid).unwrap();
        assert!(v <= 5.0, "{v}");

        // (1 - t) Σ_{n=1}^{100} n t^{n-1} at t = 0.99, closed form of the finite sum
        let t: f64 = 0.99;
        let n = 100.0;
        let closed = (1.0 - (n + 1.0) * t.powf(n) + n * t.powf(n + 1.0)) / (1.0 - t).powi(2);
        let v = IndexSet::full(100).bloch_norm_estimate(100, &[t]).unwrap();
        assert!((v - (1.0 - t) * closed).abs() < 1e-10 * v);
        assert!(v >= 10.0);
    }

    #[test]
    fn bloch_rejects_bad_grid() {
        let s = set(&[1]);
        assert!(s.bloch_norm_estimate(1, &[]).is_err());
        assert!(s.bloch_norm_estimate(1, &[1.0]).is_err());
        assert!(s.bloch_norm_estimate(1, &[-0.1]).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_bloch_grid(1024);
        assert_eq!(g.len(), 4 * 10 + 8 + 1);
        assert_eq!(g[0], 0.0);
        assert!((g[4] - 0.5).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1] && w[1] < 1.0));
    }

    #[test]
    fn generator_forms() {
        let f: IndexSetForm = serde_json::from_str(r#"{"kind":"full","max":3}"#).unwrap();
        assert_eq!(f.resolve().unwrap(), set(&[0, 1, 2, 3]));
        let f: IndexSetForm =
            serde_json::from_str(r#"{"kind":"powers","base":3,"max_exp":3}"#).unwrap();
        assert_eq!(f.resolve().unwrap(), set(&[1, 3, 9, 27]));
        let f: IndexSetForm =
            serde_json::from_str(r#"{"kind":"explicit","elements":[2,5]}"#).unwrap();
        assert_eq!(f.resolve().unwrap(), set(&[2, 5]));
        let f: IndexSetForm = serde_json::from_str("[1,4,9]").unwrap();
        assert_eq!(f.resolve().unwrap(), set(&[1, 4, 9]));
        let f: IndexSetForm =
            serde_json::from_str(r#"{"kind":"bernoulli","max":100,"seed":3}"#).unwrap();
        let a = f.resolve().unwrap();
        assert_eq!(a, f.resolve().unwrap());
        assert!(a.contains(0));
        assert!(serde_json::from_str::<IndexSetForm>("[3,2]").is_err());
        assert!(
            serde_json::from_str::<IndexSetForm>(r#"{"kind":"powers","base":1,"max_exp":3}"#)
                .unwrap()
                .resolve()
                .is_err()
        );
    }

    #[test]
    fn serializes_as_plain_array() {
        assert_eq!(serde_json::to_string(&set(&[1, 2, 8])).unwrap(), "[1,2,8]");
    }

    proptest! {
        #[test]
        fn subset_gap_ratio_not_smaller(v in proptest::collection::btree_set(1u64..5000, 2..40),
                                        mask in proptest::collection::vec(any::<bool>(), 40)) {
            let s = IndexSet::from_unsorted(v.iter().copied());
            let sub = IndexSet::from_unsorted(
                s.iter().zip(&mask).filter(|(_, &keep)| keep).map(|(k, _)| k));
            if !sub.is_empty() {
                prop_assert!(sub.gap_ratio().unwrap() >= s.gap_ratio().unwrap());
            }
        }

        #[test]
        fn decomposition_is_sound(v in proptest::collection::btree_set(0u64..70_000, 0..200)) {
            let s = IndexSet::from_unsorted(v);
            let pieces = s.decompose_lacunary();
            prop_assert!(verify_decomposition(&s, &pieces).is_ok());
            let counts = s.dyadic_block_counts(17);
            let even = counts.iter().step_by(2).max().copied().unwrap_or(0);
            let odd = counts.iter().skip(1).step_by(2).max().copied().unwrap_or(0);
            let zero = usize::from(s.contains(0));
            prop_assert!(pieces.len() <= even + odd + zero);
        }

        #[test]
        fn bloch_estimate_monotone_in_cap(v in proptest::collection::btree_set(0u64..3000, 1..60),
                                          cap in 1u64..3000) {
            let s = IndexSet::from_unsorted(v);
            let grid = default_bloch_grid(4096);
            let a = s.bloch_norm_estimate(cap, &grid).unwrap();
            let b = s.bloch_norm_estimate(2 * cap, &grid).unwrap();
            prop_assert!(b >= a);
            let finer = default_bloch_grid(1 << 16);
            prop_assert!(s.bloch_norm_estimate(cap, &finer).unwrap() >= a);
        }
    }
}
