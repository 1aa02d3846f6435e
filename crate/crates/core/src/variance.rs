//! Variance of radial linear statistics `S_φ(X) = Σ φ(|x|)`.
//!
//! For a projection kernel the variance is `½∫∫|φ(x) - φ(y)|² |K(x,y)|²`.
//! Averaging `|K|²` over both angles leaves the radial form
//!
//! ```text
//! Var S_φ = 2 ∫₀¹∫₀¹ |φ(t) - φ(s)|² W_Λ(ts) ts dt ds.
//! ```

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hyperbolic::{bound_ii, bound_iii, c2_constant, Cutoff};
use crate::kernel::KernelSpec;
use crate::quad::{hyperbolic_breaks, integrate_2d, QuadResult, QuadSettings};

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A bounded radial test function with declared support `[0, r_max]`.
///
/// `r_max = 1` is allowed for constants, which are the one non-compact case
/// the variance formulas need.
#[derive(Clone)]
pub struct RadialStatistic {
    profile: Profile,
    r_max: f64,
    breakpoints: Vec<f64>,
    description: String,
}

impl fmt::Debug for RadialStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialStatistic")
            .field("r_max", &self.r_max)
            .field("breakpoints", &self.breakpoints)
            .field("description", &self.description)
            .finish()
    }
}

impl RadialStatistic {
    /// A custom profile. `breakpoints` must list every jump or kink in `(0, r_max]`.
    pub fn new<F>(
        profile: F,
        r_max: f64,
        breakpoints: Vec<f64>,
        description: impl Into<String>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(r_max > 0.0 && r_max <= 1.0) {
            return Err(LabError::Domain(format!(
                "support radius must lie in (0, 1], got {r_max}"
            )));
        }
        let mut breakpoints = breakpoints;
        if breakpoints.iter().any(|&b| !(b > 0.0 && b <= r_max)) {
            return Err(LabError::Domain(format!(
                "breakpoints must lie in (0, {r_max}], got {breakpoints:?}"
            )));
        }
        if r_max < 1.0 {
            breakpoints.push(r_max);
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(Self {
            profile: Arc::new(profile),
            r_max,
            breakpoints,
            description: description.into(),
        })
    }

    /// `1_{t ≤ r}`, the counting statistic of the disc of radius `r`.
    pub fn indicator(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(LabError::Domain(format!(
                "indicator radius must lie in (0, 1), got {r}"
            )));
        }
        Self::new(
            move |t| if t <= r { 1.0 } else { 0.0 },
            r,
            vec![],
            format!("indicator(r={r})"),
        )
    }

    /// The hyperbolic cutoff `h^{(r₀,r)}`.
    pub fn cutoff(c: Cutoff) -> Self {
        Self::new(
            move |t| c.eval(t),
            c.r(),
            vec![c.r0()],
            format!("cutoff(r0={}, r={})", c.r0(), c.r()),
        )
        .expect("cutoff radii are validated")
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |_| value, 1.0, vec![], format!("constant({value})"))
            .expect("static support")
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.r_max < 1.0 && t > self.r_max {
            0.0
        } else {
            (self.profile)(t)
        }
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    fn grid(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.breakpoints.iter().copied().filter(|&x| x < 1.0));
        b.push(1.0);
        b.dedup();
        hyperbolic_breaks(&b)
    }

    fn difference_integral<G>(&self, weight: G, quad: &QuadSettings) -> Result<QuadResult>
    where
        G: Fn(f64, f64) -> f64 + Sync,
    {
        let grid = self.grid();
        let f = |t: f64, s: f64| {
            let d = self.eval(t) - self.eval(s);
            if d == 0.0 {
                0.0
            } else {
                d * d * weight(t, s)
            }
        };
        integrate_2d(f, &grid, &grid, quad)
    }
}

/// `Var S_φ` under the DPP with kernel `spec`.
pub fn variance_radial(
    spec: &KernelSpec,
    phi: &RadialStatistic,
    quad: &QuadSettings,
) -> Result<QuadResult> {
    let half = quad.with_abs_tol(0.5 * quad.abs_tol);
    let r = phi.difference_integral(
        |t, s| {
            let ts = t * s;
            spec.w_at(ts * ts) * ts
        },
        &half,
    )?;
    Ok(r.scaled(2.0))
}

/// `∫∫ |φ(t) - φ(s)|² (1 - st)⁻² dt ds`.
pub fn bloch_bound_integral(phi: &RadialStatistic, quad: &QuadSettings) -> Result<QuadResult> {
    phi.difference_integral(
        |t, s| {
            let d = 1.0 - s * t;
            1.0 / (d * d)
        },
        quad,
    )
}

/// `E_ξ[Var S_φ]` over the Bernoulli index sets: the kernel coefficients
/// average to `Σ (n+1) xⁿ = (1 - x)⁻²`.
pub fn bernoulli_expected_variance(
    phi: &RadialStatistic,
    quad: &QuadSettings,
) -> Result<QuadResult> {
    let half = quad.with_abs_tol(0.5 * quad.abs_tol);
    let r = phi.difference_integral(
        |t, s| {
            let ts = t * s;
            let d = 1.0 - ts * ts;
            ts / (d * d)
        },
        &half,
    )?;
    Ok(r.scaled(2.0))
}

/// One radius of a [`rigidity_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub variance: QuadResult,
    pub bloch_bound: QuadResult,
    #[serde(rename = "bound_II")]
    pub bound_ii: f64,
    #[serde(rename = "bound_III")]
    pub bound_iii: f64,
    /// `variance < eps[i]` for each requested threshold.
    pub eps_flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub r0: f64,
    pub eps: Vec<f64>,
    pub c2: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,variance,bloch_bound,bound_II,bound_III,eps_flags\n");
        for row in &self.rows {
            let flags: Vec<&str> = row
                .eps_flags
                .iter()
                .map(|&b| if b { "1" } else { "0" })
                .collect();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.r,
                row.variance.value,
                row.bloch_bound.value,
                row.bound_ii,
                row.bound_iii,
                flags.join(";")
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Variance of `S_φ` for `φ = h^{(r₀,r)}` at each `r`, next to the Bloch
/// comparison integral and the bounds on (II) and (III).
pub fn rigidity_sweep(
    spec: &KernelSpec,
    r0: f64,
    rs: &[f64],
    eps: &[f64],
    quad: &QuadSettings,
) -> Result<SweepTable> {
    let c2 = c2_constant(quad)?.value;
    let cutoffs = rs
        .iter()
        .map(|&r| Cutoff::new(r0, r))
        .collect::<Result<Vec<_>>>()?;
    let rows = cutoffs
        .par_iter()
        .map(|c| {
            let phi = RadialStatistic::cutoff(*c);
            let variance = variance_radial(spec, &phi, quad)?;
            Ok(SweepRow {
                r: c.r(),
                variance,
                bloch_bound: bloch_bound_integral(&phi, quad)?,
                bound_ii: bound_ii(c, c2),
                bound_iii: bound_iii(c, c2),
                eps_flags: eps.iter().map(|&e| variance.value < e).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        r0,
        eps: eps.to_vec(),
        c2,
        rows,
    })
}
