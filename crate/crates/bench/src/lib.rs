//! Fixtures shared by the benchmarks.

use vqmargin_core::minimax::{build_family, p_sigma};
use vqmargin_core::{AdversarialFamily, Codebook, Distribution, Point, SignVector, UniformBall};

/// The adversarial family with `k = 3`, `d = 2`, `M = 1`, `n = 100`, and its
/// member `σ = (+1, −1)`.
pub fn base_family() -> (AdversarialFamily, SignVector, Distribution) {
    let fam = build_family(3, 2, 1.0, 100).expect("valid family");
    let sigma = SignVector::parse("+-").expect("balanced signs");
    let dist = p_sigma(&fam, &sigma).expect("member").into();
    (fam, sigma, dist)
}

/// `n` points drawn uniformly from the unit ball of dimension `d`.
pub fn ball_sample(n: usize, d: usize, seed: u64) -> Vec<Point> {
    let ball: Distribution = UniformBall::new(1.0, d).expect("valid ball").into();
    ball.sample(n, seed).expect("sampling")
}

/// `k` points drawn uniformly from the unit ball of dimension `d`.
pub fn ball_codebook(k: usize, d: usize, seed: u64) -> Codebook {
    Codebook::new(ball_sample(k, d, seed)).expect("distinct points")
}
