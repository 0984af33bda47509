use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{check_weights, cumulative, pick, CONTAINMENT_SLACK};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Point};
use crate::seed::Rng;

/// Mixture of isotropic planar Gaussians `N(m_i, σ²I₂)`, each truncated to
/// `B(0, M)` and renormalized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiGaussianMixture {
    means: Vec<Point>,
    sigma: f64,
    weights: Vec<f64>,
    radius: f64,
    normalizers: Vec<f64>,
    eps_trunc: f64,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

/// Mass that `N(mean, σ²I₂)` puts on the disk `B(0, M)`.
///
/// Integrates `1 − exp(−R(θ)²/2σ²)` over the direction `θ`, where `R(θ)` is the
/// distance from `mean` to the boundary circle along `θ`. The integrand is smooth
/// and periodic, so the trapezoid rule converges geometrically; the node count
/// doubles until successive values agree.
pub fn gaussian_disk_mass(mean: &[f64], sigma: f64, radius: f64) -> Result<f64> {
    if mean.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: mean.len() });
    }
    let gap = radius * radius - mean[0] * mean[0] - mean[1] * mean[1];
    if gap <= 0.0 {
        return Err(Error::Geometry(format!("mean {mean:?} is not inside B(0, {radius})")));
    }
    let two_var = 2.0 * sigma * sigma;
    let integrand = |theta: f64| {
        let proj = mean[0] * theta.cos() + mean[1] * theta.sin();
        let reach = -proj + (proj * proj + gap).sqrt();
        -(-reach * reach / two_var).exp_m1()
    };
    let rule = |nodes: usize| {
        let h = 2.0 * PI / nodes as f64;
        (0..nodes).map(|i| integrand(i as f64 * h)).sum::<f64>() / nodes as f64
    };
    let mut nodes = 64;
    let mut prev = rule(nodes);
    while nodes < 1 << 22 {
        nodes *= 2;
        let next = rule(nodes);
        if (next - prev).abs() <= 1e-14 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Integration(format!("disk mass for mean {mean:?}, sigma {sigma} did not converge")))
}

/// Validates the mixture and computes the truncation constants.
pub fn build_quasi_gaussian(
    means: Vec<Point>,
    sigma: f64,
    weights: Vec<f64>,
    radius: f64,
) -> Result<QuasiGaussianMixture> {
    if means.is_empty() {
        return Err(Error::Empty("mixture means"));
    }
    if means.len() != weights.len() {
        return Err(Error::InvalidParameter(format!("{} means but {} weights", means.len(), weights.len())));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("support radius {radius} must be positive")));
    }
    check_weights(&weights, "mixture weights")?;
    for m in &means {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: m.dim() });
        }
    }
    let b_tilde = min_mean_gap(&means);
    if b_tilde == Some(0.0) {
        return Err(Error::InvalidParameter("mixture means must be distinct".into()));
    }
    for m in &means {
        let reach = m.norm() + b_tilde.map_or(0.0, |b| b / 3.0);
        if reach > radius + CONTAINMENT_SLACK {
            return Err(Error::Geometry(format!("B({:?}, B̃/3) is not contained in B(0, {radius})", m.coords())));
        }
    }
    let normalizers =
        means.iter().map(|m| gaussian_disk_mass(m.coords(), sigma, radius)).collect::<Result<Vec<_>>>()?;
    let eps_trunc = 1.0 - normalizers.iter().copied().fold(1.0, f64::min);
    let cumulative = cumulative(&weights);
    Ok(QuasiGaussianMixture { means, sigma, weights, radius, normalizers, eps_trunc, cumulative })
}

fn min_mean_gap(means: &[Point]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            let g = dist_sq(means[i].coords(), means[j].coords()).sqrt();
            best = Some(best.map_or(g, |b| b.min(g)));
        }
    }
    best
}

impl QuasiGaussianMixture {
    pub fn means(&self) -> &[Point] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn normalizers(&self) -> &[f64] {
        &self.normalizers
    }

    pub fn eps_trunc(&self) -> f64 {
        self.eps_trunc
    }

    /// Smallest distance between two distinct means; `None` for one component.
    pub fn b_tilde(&self) -> Option<f64> {
        min_mean_gap(&self.means)
    }

    pub fn theta_min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn theta_max(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Density of component `i` alone (not weighted by `θ_i`).
    pub fn component_density(&self, i: usize, x: &[f64]) -> f64 {
        if x[0] * x[0] + x[1] * x[1] > self.radius * self.radius {
            return 0.0;
        }
        let two_var = 2.0 * self.sigma * self.sigma;
        (-dist_sq(self.means[i].coords(), x) / two_var).exp() / (PI * two_var * self.normalizers[i])
    }

    pub(crate) fn density(&self, x: &[f64]) -> f64 {
        (0..self.means.len()).map(|i| self.weights[i] * self.component_density(i, x)).sum()
    }

    /// Draws a component label and a point from that truncated component.
    pub fn draw_labelled(&self, rng: &mut Rng) -> (usize, Point) {
        let i = pick(&self.cumulative, rng.random());
        let m = self.means[i].coords();
        let r2 = self.radius * self.radius;
        loop {
            let x = m[0] + self.sigma * rng.sample::<f64, _>(StandardNormal);
            let y = m[1] + self.sigma * rng.sample::<f64, _>(StandardNormal);
            if x * x + y * y <= r2 {
                return (i, Point::from_vec(vec![x, y]));
            }
        }
    }

    pub(crate) fn draw(&self, rng: &mut Rng) -> Point {
        self.draw_labelled(rng).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Polar quadrature about the origin: Simpson in radius, trapezoid in angle.
    fn polar_mass(mean: [f64; 2], sigma: f64, radius: f64) -> f64 {
        let (nr, nt) = (4000, 512);
        let hr = radius / nr as f64;
        let ht = 2.0 * PI / nt as f64;
        let f = |r: f64| {
            (0..nt)
                .map(|j| {
                    let t = j as f64 * ht;
                    let dx = r * t.cos() - mean[0];
                    let dy = r * t.sin() - mean[1];
                    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
                })
                .sum::<f64>()
                * ht
                * r
                / (2.0 * PI * sigma * sigma)
        };
        let mut s = f(0.0) + f(radius);
        for i in 1..nr {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hr);
        }
        s * hr / 3.0
    }

    #[test]
    fn disk_mass_matches_polar_quadrature() {
        for (mean, sigma) in [([0.3, -0.2], 0.4), ([0.7, 0.1], 0.2), ([0.0, 0.0], 0.5)] {
            let a = gaussian_disk_mass(&mean, sigma, 1.0).unwrap();
            let b = polar_mass(mean, sigma, 1.0);
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn centered_component_radial_closed_form() {
        let sigma = 0.1;
        let n = gaussian_disk_mass(&[0.0, 0.0], sigma, 10.0 * sigma).unwrap();
        assert!((n - (1.0 - (-50.0f64).exp())).abs() < 1e-15);
        let n = gaussian_disk_mass(&[0.0, 0.0], 1.0, 1.5).unwrap();
        assert!((n - (1.0 - (-1.125f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn well_inside_means_have_small_truncation() {
        let means = vec![Point::from([0.0, 0.0]), Point::from([1.0, 0.0]), Point::from([0.5, 0.866])];
        let q = build_quasi_gaussian(means, 0.05, vec![1.0 / 3.0; 3], 3.0).unwrap();
        assert!(q.normalizers().iter().all(|&n| n > 0.999));
        assert!(q.eps_trunc() < 1e-3);
        assert!((q.b_tilde().unwrap() - 0.99997).abs() < 1e-3);
    }

    #[test]
    fn containment_is_enforced() {
        let means = vec![Point::from([0.0, 0.0]), Point::from([0.9, 0.0])];
        let err = build_quasi_gaussian(means, 0.05, vec![0.5, 0.5], 1.0).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn density_vanishes_outside() {
        let q = build_quasi_gaussian(vec![Point::from([0.0, 0.0])], 0.5, vec![1.0], 1.0).unwrap();
        assert_eq!(q.density(&[1.01, 0.0]), 0.0);
        assert!(q.density(&[0.0, 0.0]) > 0.0);
    }
}
