//! Hyperbolic geometry on the radius interval `[0, 1)` and the cutoff
//! profiles built from it.
//!
//! The cutoff `h^{(r₀,r)}` equals 1 up to `r₀`, 0 from `r` on, and in between
//! decays linearly in hyperbolic distance to `r`. Its Dirichlet-type energy
//! against `(1 - st)⁻²` splits over the unit square (with `t < s`, doubled by
//! symmetry) into four domains:
//!
//! | domain              | integrand                         |
//! |---------------------|-----------------------------------|
//! | (I)   t < r₀, r < s | 1                                 |
//! | (II)  r₀ < t < s < r| (ρ(s,t)/ρ(r₀,r))²                 |
//! | (III) r₀ < t < r < s| h(t)²                             |
//! | (IV)  t < r₀ < s < r| (1 - h(s))²                       |
//!
//! each multiplied by `(1 - st)⁻²`. (I) has a closed form, and (II)–(IV) are
//! bounded through the Möbius invariance of `(1 - st)⁻² ds dt` by multiples of
//! `C₂ = ∫₀¹ ρ(s,0)² ds = π²/3`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad::{hyperbolic_breaks, integrate_1d, integrate_2d, QuadResult, QuadSettings};

/// Disc automorphism restricted to the real diameter: `(b - a) / (1 - ab)`.
pub fn mobius(a: f64, b: f64) -> f64 {
    (b - a) / one_minus_product(a, b)
}

/// `1 - ab` without cancellation when both are close to 1.
fn one_minus_product(a: f64, b: f64) -> f64 {
    if a >= 0.5 && b >= 0.5 {
        (1.0 - a) + a * (1.0 - b)
    } else {
        1.0 - a * b
    }
}

/// Poincaré distance `log((1 + |φ_t(s)|) / (1 - |φ_t(s)|))` between two radii.
pub fn poincare(t: f64, s: f64) -> f64 {
    let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
    if lo == hi {
        return 0.0;
    }
    let denom = one_minus_product(lo, hi);
    let m = (hi - lo) / denom;
    if m < 0.5 {
        2.0 * m.atanh()
    } else {
        // 1 - m = (1 - hi)(1 + lo) / (1 - lo·hi)
        let one_minus_m = (1.0 - hi) * (1.0 + lo) / denom;
        m.ln_1p() - one_minus_m.ln()
    }
}

/// The cutoff profile `h^{(r₀,r)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    r0: f64,
    r: f64,
}

impl Cutoff {
    /// Requires `0 < r0 < r < 1`.
    pub fn new(r0: f64, r: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0 < r && r < 1.0) {
            return Err(LabError::Domain(format!(
                "cutoff needs 0 < r0 < r < 1, got r0 = {r0}, r = {r}"
            )));
        }
        Ok(Self { r0, r })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `ρ(r₀, r)`.
    pub fn span(&self) -> f64 {
        poincare(self.r0, self.r)
    }

    /// `ρ(0, φ_{r₀}(r))`, which equals [`Cutoff::span`] by Möbius invariance.
    pub fn normalized_span(&self) -> f64 {
        poincare(0.0, mobius(self.r0, self.r))
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.r0 {
            1.0
        } else if t >= self.r {
            0.0
        } else {
            (poincare(t, self.r) / self.span()).clamp(0.0, 1.0)
        }
    }
}

/// Closed form of (I): `log((1 - r₀r) / (1 - r₀))`.
pub fn lemma_integral_i(r0: f64, r: f64) -> Result<f64> {
    Cutoff::new(r0, r)?;
    Ok((-r0 * r).ln_1p() - (-r0).ln_1p())
}

fn bergman_weight(t: f64, s: f64) -> f64 {
    let d = one_minus_product(t, s);
    1.0 / (d * d)
}

/// (I) by direct quadrature over `[0, r₀] × [r, 1]`.
pub fn lemma_integral_i_quadrature(r0: f64, r: f64, quad: &QuadSettings) -> Result<QuadResult> {
    Cutoff::new(r0, r)?;
    let tb = hyperbolic_breaks(&[0.0, r0]);
    let sb = hyperbolic_breaks(&[r, 1.0]);
    integrate_2d(bergman_weight, &tb, &sb, quad)
}

/// (II): `∫_{r₀}^{r} ∫_t^r (ρ(s,t)/ρ(r₀,r))² (1 - st)⁻² ds dt`.
///
/// The integrand is symmetric in `(s, t)` and smooth across the diagonal, so
/// this integrates the square `[r₀, r]²` and halves.
pub fn lemma_integral_ii(c: &Cutoff, quad: &QuadSettings) -> Result<QuadResult> {
    let span = c.span();
    let b = hyperbolic_breaks(&[c.r0, c.r]);
    let f = |t: f64, s: f64| {
        let q = poincare(s, t) / span;
        q * q * bergman_weight(t, s)
    };
    Ok(integrate_2d(f, &b, &b, &quad.with_abs_tol(2.0 * quad.abs_tol))?.scaled(0.5))
}

/// (III): `∫_{r₀}^{r} ∫_r^1 h(t)² (1 - st)⁻² ds dt`.
pub fn lemma_integral_iii(c: &Cutoff, quad: &QuadSettings) -> Result<QuadResult> {
    let tb = hyperbolic_breaks(&[c.r0, c.r]);
    let sb = hyperbolic_breaks(&[c.r, 1.0]);
    let f = |t: f64, s: f64| {
        let h = c.eval(t);
        h * h * bergman_weight(t, s)
    };
    integrate_2d(f, &tb, &sb, quad)
}

/// (IV): `∫_0^{r₀} ∫_{r₀}^{r} (1 - h(s))² (1 - st)⁻² ds dt`.
pub fn lemma_integral_iv(c: &Cutoff, quad: &QuadSettings) -> Result<QuadResult> {
    let tb = hyperbolic_breaks(&[0.0, c.r0]);
    let sb = hyperbolic_breaks(&[c.r0, c.r]);
    let f = |t: f64, s: f64| {
        let g = 1.0 - c.eval(s);
        g * g * bergman_weight(t, s)
    };
    integrate_2d(f, &tb, &sb, quad)
}

/// `C₂ = ∫₀¹ log²((1+s)/(1-s)) ds`.
///
/// With `s = 1 - e^{-u}` the logarithmic singularity at `s = 1` becomes the
/// smooth, exponentially decaying `(u + log(2 - e^{-u}))² e^{-u}` on `[0, ∞)`.
/// The range is cut at `u = 80`, where the dropped tail is below `1e-30`.
pub fn c2_constant(quad: &QuadSettings) -> Result<QuadResult> {
    let f = |u: f64| {
        let e = (-u).exp();
        let l = u + (2.0 - e).ln();
        l * l * e
    };
    let breaks = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 80.0];
    integrate_1d(f, &breaks, quad)
}

/// `∫₀¹∫₀¹ |h(t) - h(s)|² (1 - st)⁻² ds dt` over the whole square.
pub fn full_lemma_check(c: &Cutoff, quad: &QuadSettings) -> Result<QuadResult> {
    let b = hyperbolic_breaks(&[0.0, c.r0, c.r, 1.0]);
    let f = |t: f64, s: f64| {
        let d = c.eval(t) - c.eval(s);
        if d == 0.0 {
            0.0
        } else {
            d * d * bergman_weight(t, s)
        }
    };
    integrate_2d(f, &b, &b, quad)
}

/// Upper bound `C₂ / (2ρ(0, φ_{r₀}(r)))` for (II).
pub fn bound_ii(c: &Cutoff, c2: f64) -> f64 {
    c2 / (2.0 * c.normalized_span())
}

/// Upper bound `C₂ / ρ(0, φ_{r₀}(r))²` for (III).
pub fn bound_iii(c: &Cutoff, c2: f64) -> f64 {
    c2 / c.normalized_span().powi(2)
}

/// Upper bound `r₀·C₂ / ρ(0, φ_{r₀}(r))²` for (IV).
pub fn bound_iv(c: &Cutoff, c2: f64) -> f64 {
    c.r0 * c2 / c.normalized_span().powi(2)
}

/// All lemma quantities for one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub r0: f64,
    pub r: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "I_quadrature")]
    pub i_quadrature: QuadResult,
    #[serde(rename = "II")]
    pub ii: QuadResult,
    #[serde(rename = "III")]
    pub iii: QuadResult,
    #[serde(rename = "IV")]
    pub iv: QuadResult,
    pub full: QuadResult,
    pub bound_ii: f64,
    pub bound_iii: f64,
    pub bound_iv: f64,
}

impl LemmaReport {
    pub fn compute(c: &Cutoff, c2: f64, quad: &QuadSettings) -> Result<Self> {
        Ok(Self {
            r0: c.r0,
            r: c.r,
            i: lemma_integral_i(c.r0, c.r)?,
            i_quadrature: lemma_integral_i_quadrature(c.r0, c.r, quad)?,
            ii: lemma_integral_ii(c, quad)?,
            iii: lemma_integral_iii(c, quad)?,
            iv: lemma_integral_iv(c, quad)?,
            full: full_lemma_check(c, quad)?,
            bound_ii: bound_ii(c, c2),
            bound_iii: bound_iii(c, c2),
            bound_iv: bound_iv(c, c2),
        })
    }

    /// `2·((I) + (II) + (III) + (IV))`.
    pub fn decomposed_total(&self) -> f64 {
        2.0 * (self.i + self.ii.value + self.iii.value + self.iv.value)
    }
}
