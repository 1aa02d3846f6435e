//! Finite-rank sub-Bergman kernels `K_Λ(z, w) = Σ_{n∈Λ} (n+1) zⁿ w̄ⁿ`.
//!
//! All series run over `Λ_N = {n ∈ Λ : n ≤ cap}` in ascending order with
//! compensated summation. The reference measure is normalized area measure on
//! the disc, under which `√(n+1) zⁿ` are orthonormal.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::indexset::{pow_u64, IndexSet, IndexSetForm};
use crate::sum::Neumaier;

/// Ranks above this evaluate the angular average through `f`, `f′`, `f″`.
pub const DERIVATIVE_PATH_MIN_RANK: usize = 256;

/// A sub-Bergman projection kernel truncated at `cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    lambda: IndexSet,
    cap: u64,
    effective: Vec<u64>,
}

impl KernelSpec {
    /// Fails with [`LabError::EmptyKernel`] when no index of `lambda` is `≤ cap`.
    pub fn new(lambda: IndexSet, cap: u64) -> Result<Self> {
        let effective = lambda.truncate(cap).into_vec();
        if effective.is_empty() {
            return Err(LabError::EmptyKernel { cap });
        }
        Ok(Self {
            lambda,
            cap,
            effective,
        })
    }

    pub fn lambda(&self) -> &IndexSet {
        &self.lambda
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// The retained exponents `Λ_N`.
    pub fn exponents(&self) -> &[u64] {
        &self.effective
    }

    pub fn rank(&self) -> usize {
        self.effective.len()
    }

    /// `K(z, w)`.
    pub fn eval_kernel(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        check_point(z, "z")?;
        check_point(w, "w")?;
        let u = z * w.conj();
        let mut re = Neumaier::new();
        let mut im = Neumaier::new();
        let mut power = Complex64::new(1.0, 0.0);
        let mut prev = 0u64;
        for &n in &self.effective {
            power *= complex_pow(u, n - prev);
            prev = n;
            if power.re == 0.0 && power.im == 0.0 {
                break;
            }
            let c = (n + 1) as f64;
            re.add(c * power.re);
            im.add(c * power.im);
        }
        Ok(Complex64::new(re.total(), im.total()))
    }

    /// Diagonal `K(z, z)` at `|z| = t`.
    pub fn intensity(&self, t: f64) -> Result<f64> {
        check_radius(t, "t")?;
        Ok(series(&self.effective, t * t, 0, |n| (n + 1) as f64))
    }

    /// `W_Λ(ts) = Σ (n+1)² (ts)^{2n}`, the angular average of `|K(te^{iα}, se^{iβ})|²`.
    pub fn angular_avg_sq(&self, t: f64, s: f64) -> Result<f64> {
        check_radius(t, "t")?;
        check_radius(s, "s")?;
        let p = t * s;
        Ok(self.w_series(p * p))
    }

    /// The same quantity through `x² f″_Λ(x) + 3x f′_Λ(x) + f_Λ(x)` at `x = t²s²`.
    pub fn w_via_derivatives(&self, t: f64, s: f64) -> Result<f64> {
        check_radius(t, "t")?;
        check_radius(s, "s")?;
        let p = t * s;
        Ok(self.w_derivatives(p * p))
    }

    /// Expected number of points in `{|z| ≤ r}`: `Σ r^{2n+2}`.
    pub fn expected_count_in_disc(&self, r: f64) -> Result<f64> {
        check_radius(r, "r")?;
        let r2 = r * r;
        Ok(r2 * series(&self.effective, r2, 0, |_| 1.0))
    }

    /// `W_Λ(√x)` by whichever route suits the rank; both routes agree to
    /// rounding.
    pub fn w_at(&self, x: f64) -> f64 {
        if self.rank() >= DERIVATIVE_PATH_MIN_RANK {
            self.w_derivatives(x)
        } else {
            self.w_series(x)
        }
    }

    fn w_series(&self, x: f64) -> f64 {
        series(&self.effective, x, 0, |n| {
            let c = (n + 1) as f64;
            c * c
        })
    }

    fn w_derivatives(&self, x: f64) -> f64 {
        let f = series(&self.effective, x, 0, |_| 1.0);
        let f1 = series(&self.effective, x, 1, |n| n as f64);
        let f2 = series(&self.effective, x, 2, |n| (n * (n - 1)) as f64);
        x * x * f2 + 3.0 * x * f1 + f
    }

    /// Orthonormal basis evaluated at `z`: `(√(n+1) zⁿ)_{n∈Λ_N}`.
    pub fn basis_at(&self, z: Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rank());
        let mut power = Complex64::new(1.0, 0.0);
        let mut prev = 0u64;
        for &n in &self.effective {
            power *= complex_pow(z, n - prev);
            prev = n;
            out.push(power * ((n + 1) as f64).sqrt());
        }
        out
    }

    /// Observed constant `C″ = max W_Λ(ts)·(1 - t²s²)²` over a grid of products `ts`.
    ///
    /// For `f_Λ` in the Bloch space this stays bounded as the grid approaches 1.
    pub fn bloch_chain_constant(&self, ts_grid: &[f64]) -> Result<f64> {
        let mut best = 0.0f64;
        for &p in ts_grid {
            check_radius(p, "ts")?;
            let x = p * p;
            best = best.max(self.w_at(x) * (1.0 - x).powi(2));
        }
        Ok(best)
    }
}

/// Smallest cap whose dropped tail `Σ_{n>cap} (n+1)² ρ^{2n}` is below `tol`.
pub fn default_cap(max_radius: f64, tol: f64) -> Result<u64> {
    check_radius(max_radius, "max_radius")?;
    if max_radius == 0.0 {
        return Ok(0);
    }
    let x = max_radius * max_radius;
    // Past the peak of (n+1)² xⁿ the ratio of consecutive terms is at most
    // q = ((n+2)/(n+1))² x < 1, so the tail is bounded by term·q/(1 - q).
    let mut n: u64 = 0;
    let mut term = 1.0f64; // (n+1)² xⁿ
    loop {
        let ratio = ((n + 2) as f64 / (n + 1) as f64).powi(2) * x;
        if ratio < 1.0 {
            let next = term * ratio;
            let tail = next / (1.0 - ratio);
            if tail < tol {
                return Ok(n);
            }
        }
        term *= ratio;
        n += 1;
        if n > 1 << 40 {
            return Err(LabError::Domain(format!(
                "radius {max_radius} too close to 1 for a finite cap"
            )));
        }
    }
}

/// Kernel as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub lambda: IndexSetForm,
    pub cap: u64,
}

impl KernelConfig {
    pub fn resolve(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.lambda.resolve()?, self.cap)
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        KernelConfig {
            lambda: IndexSetForm::Array(self.lambda.clone()),
            cap: self.cap,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        KernelConfig::deserialize(deserializer)?
            .resolve()
            .map_err(serde::de::Error::custom)
    }
}

/// `Σ_{n∈exps, n≥shift} coef(n) x^{n-shift}` in ascending order.
fn series(exps: &[u64], x: f64, shift: u64, coef: impl Fn(u64) -> f64) -> f64 {
    let start = exps.partition_point(|&n| n < shift);
    let mut acc = Neumaier::new();
    let mut power = 1.0;
    let mut prev = shift;
    for &n in &exps[start..] {
        power *= pow_u64(x, n - prev);
        prev = n;
        if power == 0.0 {
            break;
        }
        acc.add(coef(n) * power);
    }
    acc.total()
}

fn complex_pow(z: Complex64, n: u64) -> Complex64 {
    match n {
        0 => Complex64::new(1.0, 0.0),
        1 => z,
        n if n <= u32::MAX as u64 => z.powu(n as u32),
        n => z.powf(n as f64),
    }
}

fn check_radius(t: f64, name: &str) -> Result<()> {
    if (0.0..1.0).contains(&t) {
        Ok(())
    } else {
        Err(LabError::Domain(format!("{name} = {t} is outside [0, 1)")))
    }
}

fn check_point(z: Complex64, name: &str) -> Result<()> {
    if z.norm() < 1.0 {
        Ok(())
    } else {
        Err(LabError::Domain(format!(
            "{name} = {z} is outside the open unit disc"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(v: &[u64], cap: u64) -> KernelSpec {
        KernelSpec::new(IndexSet::new(v.to_vec()).unwrap(), cap).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn empty_truncation_rejected() {
        let e = KernelSpec::new(IndexSet::new(vec![5, 9]).unwrap(), 4).unwrap_err();
        assert_eq!(e, LabError::EmptyKernel { cap: 4 });
        assert!(KernelSpec::new(IndexSet::empty(), 10).is_err());
    }

    #[test]
    fn kernel_at_origin() {
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(
            spec(&[0, 3], 10).eval_kernel(zero, zero).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        assert_eq!(
            spec(&[1, 3], 10).eval_kernel(zero, zero).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn full_bergman_closed_form() {
        let k = KernelSpec::new(IndexSet::full(200), 200).unwrap();
        let z = Complex64::new(0.5, 0.0);
        let v = k.eval_kernel(z, z).unwrap();
        assert!((v.re - 16.0 / 9.0).abs() < 1e-10);
        assert_eq!(v.im, 0.0);
        // general points against 1/(1 - z w̄)²
        let z = Complex64::new(0.3, -0.4);
        let w = Complex64::new(-0.1, 0.6);
        let exact = (Complex64::new(1.0, 0.0) - z * w.conj()).powi(-2);
        assert!((k.eval_kernel(z, w).unwrap() - exact).norm() < 1e-12);
    }

    #[test]
    fn rejects_points_outside_disc() {
        let k = spec(&[0], 1);
        let out = Complex64::new(0.8, 0.6);
        assert!(k.eval_kernel(out, Complex64::new(0.0, 0.0)).is_err());
        assert!(k.intensity(1.0).is_err());
        assert!(k.intensity(-0.1).is_err());
    }

    #[test]
    fn intensity_examples() {
        assert_eq!(spec(&[0, 5], 10).intensity(0.0).unwrap(), 1.0);
        let t: f64 = 0.7;
        assert!(rel(spec(&[3], 3).intensity(t).unwrap(), 4.0 * t.powi(6)) < 1e-15);
        let full = KernelSpec::new(IndexSet::full(400), 400).unwrap();
        assert!(rel(full.intensity(0.5).unwrap(), 16.0 / 9.0) < 1e-14);
    }

    #[test]
    fn angular_average_closed_form() {
        let full = KernelSpec::new(IndexSet::full(400), 400).unwrap();
        let t = 0.5f64.sqrt();
        let ts = t * t; // = 0.5, x = 0.25
        let x = ts * ts;
        let closed = (1.0 + x) / (1.0 - x).powi(3);
        assert!((closed - 2.962_962_962_962_963).abs() < 1e-12);
        assert!(rel(full.angular_avg_sq(t, t).unwrap(), closed) < 1e-13);
        assert!(rel(full.w_via_derivatives(t, t).unwrap(), closed) < 1e-13);
        assert_eq!(spec(&[0, 4], 9).angular_avg_sq(0.0, 0.9).unwrap(), 1.0);
        assert_eq!(spec(&[0, 4], 9).w_via_derivatives(0.9, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn angular_average_matches_brute_force_mean_over_angles() {
        // Trapezoid rule in both angles is exact for trigonometric polynomials
        // of degree below the node count.
        let k = spec(&[0, 1, 3, 7], 7);
        let (t, s) = (0.8, 0.6);
        let m = 32;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                let b = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                let v = k
                    .eval_kernel(Complex64::from_polar(t, a), Complex64::from_polar(s, b))
                    .unwrap();
                acc += v.norm_sqr();
            }
        }
        acc /= (m * m) as f64;
        assert!(rel(k.angular_avg_sq(t, s).unwrap(), acc) < 1e-13);
    }

    #[test]
    fn expected_counts() {
        assert_eq!(spec(&[0, 1], 1).expected_count_in_disc(0.0).unwrap(), 0.0);
        assert!(rel(spec(&[0], 0).expected_count_in_disc(0.3).unwrap(), 0.09) < 1e-15);
        let full = KernelSpec::new(IndexSet::full(200), 200).unwrap();
        assert!(rel(full.expected_count_in_disc(0.5).unwrap(), 1.0 / 3.0) < 1e-14);
        let k = spec(&[0, 2, 9], 9);
        assert!((k.expected_count_in_disc(0.999_999).unwrap() - 3.0).abs() < 1e-4);
    }

    #[test]
    fn basis_reproduces_kernel() {
        let k = spec(&[0, 2, 5, 11], 20);
        let z = Complex64::new(0.2, 0.7);
        let w = Complex64::new(-0.5, 0.1);
        let bz = k.basis_at(z);
        let bw = k.basis_at(w);
        let via_basis: Complex64 = bz.iter().zip(&bw).map(|(a, b)| a * b.conj()).sum();
        assert!((via_basis - k.eval_kernel(z, w).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn default_cap_tail_bound() {
        let rho: f64 = 0.9;
        let cap = default_cap(rho, 1e-14).unwrap();
        let x = rho * rho;
        let tail: f64 = ((cap + 1)..(cap + 5000))
            .map(|n| ((n + 1) as f64).powi(2) * x.powi(n as i32))
            .sum();
        assert!(tail < 1e-14, "cap {cap} tail {tail}");
        let head_tail: f64 = (cap..(cap + 5000))
            .map(|n| ((n + 1) as f64).powi(2) * x.powi(n as i32))
            .sum();
        assert!(head_tail >= 1e-16, "cap {cap} is not far from minimal");
        assert_eq!(default_cap(0.0, 1e-14).unwrap(), 0);
    }

    #[test]
    fn lacunary_bloch_chain_constant_bounded() {
        let pow2 = KernelSpec::new(IndexSet::powers(2, 14).unwrap(), 1 << 14).unwrap();
        let grid: Vec<f64> = (0..60).map(|j| 1.0 - (-(j as f64) / 6.0).exp2()).collect();
        let near: Vec<f64> = grid.iter().copied().filter(|&p| p < 0.999).collect();
        let c_near = pow2.bloch_chain_constant(&near).unwrap();
        let c_all = pow2.bloch_chain_constant(&grid).unwrap();
        // for the truncated lacunary set the constant saturates
        assert!(c_all <= 1.5 * c_near, "{c_near} {c_all}");
        let full = KernelSpec::new(IndexSet::full(1 << 14), 1 << 14).unwrap();
        // for ℕ, W(ts)(1-x)² = (1+x)(1-x)^{-1} blows up
        assert!(full.bloch_chain_constant(&grid).unwrap() > 100.0 * c_all);
    }

    #[test]
    fn serde_roundtrip_via_generator() {
        let k: KernelSpec =
            serde_json::from_str(r#"{"lambda":{"kind":"powers","base":2,"max_exp":4},"cap":8}"#)
                .unwrap();
        assert_eq!(k.exponents(), &[1, 2, 4, 8]);
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(json, r#"{"lambda":[1,2,4,8,16],"cap":8}"#);
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, k);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"lambda":[5],"cap":1}"#).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = KernelSpec> {
        (proptest::collection::btree_set(0u64..512, 1..80), 0u64..512)
            .prop_filter_map("non-empty truncation", |(v, cap)| {
                KernelSpec::new(IndexSet::from_unsorted(v), cap).ok()
            })
    }

    proptest! {
        #[test]
        fn hermitian(k in arb_spec(), a in 0.0..0.99f64, b in 0.0..0.99f64,
                     al in 0.0..6.3f64, be in 0.0..6.3f64) {
            let z = Complex64::from_polar(a, al);
            let w = Complex64::from_polar(b, be);
            let kzw = k.eval_kernel(z, w).unwrap();
            let kwz = k.eval_kernel(w, z).unwrap();
            prop_assert!((kzw - kwz.conj()).norm() <= 1e-12 * kzw.norm().max(1.0));
        }

        #[test]
        fn diagonal_is_radial_intensity(k in arb_spec(), a in 0.0..0.99f64, al in 0.0..6.3f64) {
            let z = Complex64::from_polar(a, al);
            let d = k.eval_kernel(z, z).unwrap();
            let i = k.intensity(a).unwrap();
            prop_assert!(d.re >= 0.0);
            prop_assert!((d.re - i).abs() <= 1e-12 * i.max(1.0));
            prop_assert!(d.im.abs() <= 1e-12 * i.max(1.0));
        }

        #[test]
        fn two_routes_agree(k in arb_spec(), t in 0.0..0.999f64, s in 0.0..0.999f64) {
            let a = k.angular_avg_sq(t, s).unwrap();
            let b = k.w_via_derivatives(t, s).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
            prop_assert_eq!(a, k.angular_avg_sq(s, t).unwrap());
        }

        #[test]
        fn angular_average_monotone(k in arb_spec(), t in 0.0..0.99f64, s in 0.0..0.99f64, dt in 0.0..0.009f64) {
            prop_assert!(k.angular_avg_sq(t + dt, s).unwrap() >= k.angular_avg_sq(t, s).unwrap());
        }

        #[test]
        fn count_tends_to_rank(k in arb_spec()) {
            let n = k.expected_count_in_disc(0.999_999_999).unwrap();
            prop_assert!(n <= k.rank() as f64 + 1e-9);
            let max = *k.exponents().last().unwrap() as f64;
            // 1 - r^{2n+2} ≤ (2n+2)(1-r)
            prop_assert!(k.rank() as f64 - n <= k.rank() as f64 * (2.0 * max + 2.0) * 1e-9 + 1e-9);
        }
    }
}
