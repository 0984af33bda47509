//! Source distributions with seeded sampling and densities.
//!
//! Samples are produced in fixed-size chunks, each drawn from its own derived
//! ChaCha8 stream, so a sample of size `n` is a prefix of any larger sample
//! with the same seed and parallel evaluation never changes the draws.

mod cone;
mod finite;
mod gaussian;
mod uniform;

use rayon::prelude::*;
use serde::Serialize;

pub use cone::{cone_cell_moment, cone_radial_cdf, ConeBallDistribution};
pub use finite::FiniteSupport;
pub use gaussian::{build_quasi_gaussian, gaussian_disk_mass, QuasiGaussianMixture};
pub use uniform::UniformBall;

use crate::error::{Error, Result};
use crate::geometry::{Codebook, Point};
use crate::seed::{self, Rng};

/// Number of draws per independently seeded chunk.
pub const SAMPLE_CHUNK: usize = 4096;

/// Slack used when checking that supports fit in their bounding ball.
pub(crate) const CONTAINMENT_SLACK: f64 = 1e-12;

/// Optimal quantization facts known in closed form for a distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownOptimum {
    pub codebooks: Vec<Codebook>,
    /// Largest radius on which the weight function is identically zero.
    pub margin_radius: f64,
    /// Excess risk of the best non-optimal stationary codebook.
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    FiniteSupport(FiniteSupport),
    QuasiGaussian(QuasiGaussianMixture),
    ConeBall(ConeBallDistribution),
    UniformBall(UniformBall),
}

impl From<FiniteSupport> for Distribution {
    fn from(d: FiniteSupport) -> Self {
        Self::FiniteSupport(d)
    }
}

impl From<QuasiGaussianMixture> for Distribution {
    fn from(d: QuasiGaussianMixture) -> Self {
        Self::QuasiGaussian(d)
    }
}

impl From<ConeBallDistribution> for Distribution {
    fn from(d: ConeBallDistribution) -> Self {
        Self::ConeBall(d)
    }
}

impl From<UniformBall> for Distribution {
    fn from(d: UniformBall) -> Self {
        Self::UniformBall(d)
    }
}

impl Distribution {
    pub fn family(&self) -> &'static str {
        match self {
            Self::FiniteSupport(_) => "finite_support",
            Self::QuasiGaussian(_) => "quasi_gaussian",
            Self::ConeBall(_) => "cone_ball",
            Self::UniformBall(_) => "uniform_ball",
        }
    }

    /// Radius `M` of the ball containing the support.
    pub fn radius(&self) -> f64 {
        match self {
            Self::FiniteSupport(d) => d.radius(),
            Self::QuasiGaussian(d) => d.radius(),
            Self::ConeBall(d) => d.radius(),
            Self::UniformBall(d) => d.radius(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::FiniteSupport(d) => d.dim(),
            Self::QuasiGaussian(_) => 2,
            Self::ConeBall(d) => d.dim(),
            Self::UniformBall(d) => d.dim(),
        }
    }

    pub fn known_optimum(&self, k: usize) -> Option<&KnownOptimum> {
        match self {
            Self::ConeBall(d) => d.known_optimum().filter(|o| o.codebooks[0].k() == k),
            _ => None,
        }
    }

    /// Density at `x`; zero outside the support ball.
    pub fn density(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.dim() });
        }
        match self {
            Self::FiniteSupport(_) => Err(Error::NoDensity),
            Self::QuasiGaussian(d) => Ok(d.density(x.coords())),
            Self::ConeBall(d) => Ok(d.density(x.coords())),
            Self::UniformBall(d) => Ok(d.density(x.coords())),
        }
    }

    fn draw(&self, rng: &mut Rng) -> Point {
        match self {
            Self::FiniteSupport(d) => d.draw(rng),
            Self::QuasiGaussian(d) => d.draw(rng),
            Self::ConeBall(d) => d.draw(rng),
            Self::UniformBall(d) => d.draw(rng),
        }
    }

    fn chunk(&self, seed: u64, index: usize, len: usize) -> Vec<Point> {
        let mut rng = seed::rng(seed::derive(seed, index as u64));
        (0..len).map(|_| self.draw(&mut rng)).collect()
    }

    /// `n` i.i.d. draws, deterministic in `(self, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Point>> {
        if n == 0 {
            return Err(Error::Empty("sample request"));
        }
        Ok(self.map_sample_chunks(n, seed, |chunk| chunk.to_vec()).into_iter().flatten().collect())
    }

    /// Applies `f` to each chunk of the sample `sample(n, seed)` in parallel and
    /// returns the results in chunk order.
    pub fn map_sample_chunks<T, F>(&self, n: usize, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[Point]) -> T + Sync,
    {
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|j| {
                let len = SAMPLE_CHUNK.min(n - j * SAMPLE_CHUNK);
                f(&self.chunk(seed, j, len))
            })
            .collect()
    }
}

/// Uniform draw from the ball `B(center, radius)`.
pub(crate) fn uniform_in_ball(rng: &mut Rng, center: &[f64], radius: f64) -> Vec<f64> {
    use rand::Rng as _;
    use rand_distr::StandardNormal;
    let d = center.len();
    loop {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        return center.iter().zip(&dir).map(|(c, u)| c + r * u / norm).collect();
    }
}

/// Index drawn from a cumulative weight table.
pub(crate) fn pick(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1)
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

pub(crate) fn check_weights(weights: &[f64], what: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Empty("weight list"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter(format!("{what} must be positive and finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("{what} sum to {total}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_sample() {
        let d: Distribution = FiniteSupport::new(vec![Point::from([0.0, 0.0])], vec![1.0], None).unwrap().into();
        let s = d.sample(5, 1).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|p| p.coords() == [0.0, 0.0]));
        assert_eq!(d.density(&Point::from([0.0, 0.0])), Err(Error::NoDensity));
    }

    #[test]
    fn samples_are_prefix_consistent_and_deterministic() {
        let d: Distribution = UniformBall::new(1.0, 3).unwrap().into();
        let a = d.sample(10_000, 42).unwrap();
        let b = d.sample(5_000, 42).unwrap();
        assert_eq!(&a[..5_000], &b[..]);
        assert_eq!(a, d.sample(10_000, 42).unwrap());
        assert_ne!(a, d.sample(10_000, 43).unwrap());
    }

    #[test]
    fn pick_respects_weights() {
        let c = cumulative(&[0.25, 0.5, 0.25]);
        assert_eq!(pick(&c, 0.0), 0);
        assert_eq!(pick(&c, 0.3), 1);
        assert_eq!(pick(&c, 0.76), 2);
        assert_eq!(pick(&c, 0.999_999), 2);
    }
}
