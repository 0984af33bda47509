//! Numerical laboratory for margin conditions in k-point vector quantization.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: nearest-neighbour assignment, bisector distances and the
//!   critical-region membership test.
//! * [`distributions`]: the source families (finite support, quasi-Gaussian
//!   mixtures, cone-ball mixtures, the uniform ball) with seeded sampling.
//! * [`quantizer`]: empirical and true risk, Lloyd iteration, empirical risk
//!   minimisation and optimal-codebook discovery.
//! * [`margin`]: `B`, `p_min`, the weight function `p(t)`, margin verdicts,
//!   `κ₀`, ε-separation and the Gaussian polarization condition.
//! * [`minimax`]: the adversarial cone-ball family, its quantizers, closed-form
//!   risks, Hellinger affinities and the quantizer reduction.
//!
//! Every randomised routine takes an explicit 64-bit seed and is deterministic
//! regardless of the size of the rayon pool it runs on.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod geometry;
pub mod margin;
pub mod minimax;
pub mod quantizer;
pub mod seed;
pub mod stats;

pub use distributions::{
    ConeBallDistribution, Distribution, FiniteSupport, KnownOptimum, QuasiGaussianMixture, UniformBall,
};
pub use error::{Error, Result};
pub use geometry::{CellAssignment, Codebook, Point};
pub use margin::{MarginReport, SeparationReport, Verdict};
pub use minimax::{AdversarialFamily, SignVector};
pub use quantizer::{CodebookSet, RiskEstimate, RiskMethod};
