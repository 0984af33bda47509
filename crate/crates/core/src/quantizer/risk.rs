use rayon::prelude::*;
use serde::Serialize;

use super::{CodebookSet, RiskEstimate, RiskMethod};
use crate::distributions::{cone_cell_moment, ConeBallDistribution, Distribution, SAMPLE_CHUNK};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, nearest_raw, Codebook, Point};

/// Smallest Monte Carlo budget accepted by the risk estimators.
pub const MIN_MC: usize = 100;

fn check_dim(c: &Codebook, d: usize) -> Result<()> {
    if c.dim() != d {
        return Err(Error::DimensionMismatch { expected: c.dim(), found: d });
    }
    Ok(())
}

/// Mean contrast of `c` over `sample`.
pub fn empirical_risk(c: &Codebook, sample: &[Point]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    for x in sample {
        check_dim(c, x.dim())?;
    }
    let partial: Vec<f64> = sample
        .par_chunks(SAMPLE_CHUNK)
        .map(|chunk| chunk.iter().map(|x| nearest_raw(c, x.coords()).distance_sq).sum::<f64>())
        .collect();
    Ok(partial.iter().sum::<f64>() / sample.len() as f64)
}

/// `Σ w_i γ(c, x_i)` for a weighted point set.
pub fn weighted_risk(c: &Codebook, points: &[Point], weights: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    if points.len() != weights.len() {
        return Err(Error::InvalidParameter("points and weights differ in length".into()));
    }
    let mut total = 0.0;
    for (x, w) in points.iter().zip(weights) {
        check_dim(c, x.dim())?;
        total += w * nearest_raw(c, x.coords()).distance_sq;
    }
    Ok(total)
}

/// Cell index of every ball of `dist` when each ball lies inside a single
/// Voronoi cell of `c`; `None` when some ball straddles a bisector.
pub fn ball_respecting_assignment(c: &Codebook, dist: &ConeBallDistribution) -> Option<Vec<usize>> {
    if c.dim() != dist.dim() {
        return None;
    }
    let rho = dist.rho();
    let mut out = Vec::with_capacity(dist.centers().len());
    for z in dist.centers() {
        let z = z.coords();
        let j = nearest_raw(c, z).index;
        let dj = dist_sq(z, c.point(j));
        for l in 0..c.k() {
            let sep = dist_sq(c.point(l), c.point(j)).sqrt();
            if l == j || sep == 0.0 {
                continue;
            }
            if (dist_sq(z, c.point(l)) - dj) / (2.0 * sep) < rho {
                return None;
            }
        }
        out.push(j);
    }
    Some(out)
}

fn cone_closed_risk(c: &Codebook, dist: &ConeBallDistribution, cells: &[usize]) -> f64 {
    let mu = cone_cell_moment(dist.rho(), dist.dim());
    dist.centers()
        .iter()
        .zip(dist.masses())
        .zip(cells)
        .map(|((z, m), &j)| m * (mu + dist_sq(z.coords(), c.point(j))))
        .sum()
}

/// `R(c)`: exact for finite support, closed form for cone balls that each sit
/// inside one cell, Monte Carlo otherwise.
pub fn true_risk(c: &Codebook, dist: &Distribution, n_mc: usize, seed: u64) -> Result<RiskEstimate> {
    check_dim(c, dist.dim())?;
    match dist {
        Distribution::FiniteSupport(f) => {
            Ok(RiskEstimate::exact(weighted_risk(c, f.atoms(), f.weights())?, RiskMethod::ExactFinite, f.atoms().len()))
        }
        Distribution::ConeBall(cb) => match ball_respecting_assignment(c, cb) {
            Some(cells) => {
                Ok(RiskEstimate::exact(cone_closed_risk(c, cb, &cells), RiskMethod::ClosedForm, cb.centers().len()))
            }
            None => true_risk_mc(c, dist, n_mc, seed),
        },
        _ => true_risk_mc(c, dist, n_mc, seed),
    }
}

/// Running count, mean and centred sum of squares, merged in chunk order.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut m = Self::default();
        for v in values {
            m.n += 1.0;
            let delta = v - m.mean;
            m.mean += delta / m.n;
            m.m2 += delta * (v - m.mean);
        }
        m
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Self { n, mean: self.mean + delta * other.n / n, m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n }
    }

    fn mean_se(self) -> (f64, f64) {
        (self.mean, (self.m2 / (self.n - 1.0) / self.n).max(0.0).sqrt())
    }
}

fn mc_moments<F>(dist: &Distribution, n_mc: usize, seed: u64, f: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_mc < MIN_MC {
        return Err(Error::TooFewSamples(n_mc));
    }
    let parts = dist.map_sample_chunks(n_mc, seed, |chunk| Moments::of(chunk.iter().map(|x| f(x.coords()))));
    Ok(parts.into_iter().fold(Moments::default(), Moments::merge).mean_se())
}

/// Plain Monte Carlo estimate of `R(c)` from `n_mc` draws.
pub fn true_risk_mc(c: &Codebook, dist: &Distribution, n_mc: usize, seed: u64) -> Result<RiskEstimate> {
    check_dim(c, dist.dim())?;
    let (value, std_error) = mc_moments(dist, n_mc, seed, |x| nearest_raw(c, x).distance_sq)?;
    Ok(RiskEstimate { value, std_error, method: RiskMethod::MonteCarlo, n_eval: n_mc })
}

/// `R(a) − R(b)` estimated on one shared sample, with its standard error.
pub fn risk_difference_mc(
    a: &Codebook,
    b: &Codebook,
    dist: &Distribution,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dim(a, dist.dim())?;
    check_dim(b, dist.dim())?;
    mc_moments(dist, n_mc, seed, |x| nearest_raw(a, x).distance_sq - nearest_raw(b, x).distance_sq)
}

/// Excess risk `ℓ(c, c*)`; may be slightly negative under Monte Carlo noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: RiskMethod,
}

/// `R(c) − min R(c*)` over `optimal`. Exact when both risks are exact;
/// otherwise a common-random-numbers difference against the best member.
pub fn loss(c: &Codebook, dist: &Distribution, optimal: &CodebookSet, n_mc: usize, seed: u64) -> Result<LossEstimate> {
    let best = optimal.best_index().ok_or(Error::Empty("optimal codebook set"))?;
    let star = &optimal.codebooks()[best];
    let rc = true_risk(c, dist, n_mc, seed)?;
    let rs = true_risk(star, dist, n_mc, seed)?;
    if rc.method.is_exact() && rs.method.is_exact() {
        return Ok(LossEstimate { value: rc.value - rs.value, std_error: 0.0, method: rc.method });
    }
    let (value, std_error) = risk_difference_mc(c, star, dist, n_mc, seed)?;
    Ok(LossEstimate { value, std_error, method: RiskMethod::MonteCarlo })
}
