use rand::Rng as _;
use serde::Serialize;

use super::{check_weights, cumulative, pick, uniform_in_ball, KnownOptimum, CONTAINMENT_SLACK};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, unit_ball_volume, Point};
use crate::seed::Rng;

/// Conditional second moment `E‖X − z‖²` of the cone profile `(ρ − ‖x − z‖)₊`
/// on `B(z, ρ)` in dimension `d`.
pub fn cone_cell_moment(rho: f64, d: usize) -> f64 {
    let d = d as f64;
    rho * rho * d * (d + 1.0) / ((d + 2.0) * (d + 3.0))
}

/// `P(‖X − z‖ ≤ r)` under the cone profile on `B(z, ρ)`.
pub fn cone_radial_cdf(r: f64, rho: f64, d: usize) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= rho {
        return 1.0;
    }
    let s = r / rho;
    let d = d as i32;
    (d + 1) as f64 * s.powi(d) - d as f64 * s.powi(d + 1)
}

/// Mixture of disjoint balls of common radius `ρ`, each carrying a cone-shaped
/// density with prescribed total mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeBallDistribution {
    centers: Vec<Point>,
    rho: f64,
    masses: Vec<f64>,
    radius: f64,
    dim: usize,
    #[serde(skip)]
    cumulative: Vec<f64>,
    #[serde(skip)]
    known_optimum: Option<KnownOptimum>,
}

impl ConeBallDistribution {
    pub fn new(centers: Vec<Point>, rho: f64, masses: Vec<f64>, radius: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Empty("ball centers"));
        }
        if centers.len() != masses.len() {
            return Err(Error::InvalidParameter(format!("{} centers but {} masses", centers.len(), masses.len())));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {rho} must be positive")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!("support radius {radius} must be positive")));
        }
        check_weights(&masses, "ball masses")?;
        let dim = centers[0].dim();
        for c in &centers {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
            }
            if c.norm() + rho > radius + CONTAINMENT_SLACK {
                return Err(Error::Geometry(format!("ball around {:?} leaves B(0, {radius})", c.coords())));
            }
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let gap = dist_sq(centers[i].coords(), centers[j].coords()).sqrt();
                if gap < 2.0 * rho {
                    return Err(Error::Geometry(format!("balls {i} and {j} overlap")));
                }
            }
        }
        let cumulative = cumulative(&masses);
        Ok(Self { centers, rho, masses, radius, dim, cumulative, known_optimum: None })
    }

    pub(crate) fn with_known_optimum(mut self, optimum: KnownOptimum) -> Self {
        self.known_optimum = Some(optimum);
        self
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.known_optimum.as_ref()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index of the ball containing `x`, if any.
    pub fn ball_of(&self, x: &[f64]) -> Option<usize> {
        let r2 = self.rho * self.rho;
        self.centers.iter().position(|c| dist_sq(c.coords(), x) < r2)
    }

    pub(crate) fn density(&self, x: &[f64]) -> f64 {
        match self.ball_of(x) {
            None => 0.0,
            Some(i) => {
                let r = dist_sq(self.centers[i].coords(), x).sqrt();
                let d = self.dim as f64;
                let norm = (d + 1.0) / (unit_ball_volume(self.dim) * self.rho.powi(self.dim as i32 + 1));
                self.masses[i] * norm * (self.rho - r)
            }
        }
    }

    pub(crate) fn draw(&self, rng: &mut Rng) -> Point {
        let i = pick(&self.cumulative, rng.random());
        let center = self.centers[i].coords();
        loop {
            let x = uniform_in_ball(rng, center, self.rho);
            let r = dist_sq(&x, center).sqrt();
            if rng.random::<f64>() * self.rho < self.rho - r {
                return Point::from_vec(x);
            }
        }
    }
}
