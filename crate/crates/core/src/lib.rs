//! Numerical laboratory for determinantal point processes on the unit disc
//! whose kernels are sub-Bergman projections
//! `K_Λ(z, w) = Σ_{n∈Λ} (n+1) zⁿ w̄ⁿ`.
//!
//! The crate evaluates these kernels, samples the processes exactly, and
//! computes the variance of radial linear statistics by quadrature, together
//! with the hyperbolic cutoff integrals and the random index sets used to
//! compare lacunary and non-lacunary `Λ`.
//!
//! ```
//! use rigidity_lab::{IndexSet, KernelSpec};
//!
//! let spec = KernelSpec::new(IndexSet::powers(2, 10)?, 1024)?;
//! assert_eq!(spec.rank(), 11); // 2⁰, …, 2¹⁰
//! assert_eq!(spec.intensity(0.0)?, 0.0); // 0 ∉ Λ
//! # Ok::<(), rigidity_lab::LabError>(())
//! ```
//!
//! The guide in `book/` walks through each module; its code blocks are
//! compiled as doc-tests.

pub mod error;
pub mod hyperbolic;
pub mod indexset;
pub mod kernel;
pub mod quad;
pub mod random_subset;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod sum;
pub mod variance;

pub use error::{LabError, Result};
pub use hyperbolic::{Cutoff, LemmaReport};
pub use indexset::{IndexSet, IndexSetForm, IndexSetGenerator};
pub use kernel::{KernelConfig, KernelSpec};
pub use quad::{QuadResult, QuadSettings};
pub use random_subset::{BernoulliDraw, BlockLaw};
pub use rng::RngState;
pub use sampler::Configuration;
pub use stats::Moments;
pub use variance::{RadialStatistic, SweepTable};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/index-sets.md")]
    mod index_sets {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/hyperbolic.md")]
    mod hyperbolic {}
    #[doc = include_str!("../../../book/src/variance.md")]
    mod variance {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/random-subsets.md")]
    mod random_subsets {}
}
