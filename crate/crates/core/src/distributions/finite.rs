use rand::Rng as _;
use serde::Serialize;

use super::{check_weights, cumulative, pick, CONTAINMENT_SLACK};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::seed::Rng;

/// A distribution supported on finitely many distinct atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteSupport {
    atoms: Vec<Point>,
    weights: Vec<f64>,
    radius: f64,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl FiniteSupport {
    /// `radius` defaults to the largest atom norm.
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>, radius: Option<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("atom list"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidParameter(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        check_weights(&weights, "atom weights")?;
        let d = atoms[0].dim();
        for a in &atoms {
            if a.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.dim() });
            }
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if atoms[i] == atoms[j] {
                    return Err(Error::InvalidParameter(format!("atoms {i} and {j} coincide")));
                }
            }
        }
        let max_norm = atoms.iter().map(Point::norm).fold(0.0, f64::max);
        let radius = radius.unwrap_or(max_norm);
        if !(radius > 0.0) && max_norm > 0.0 || radius < max_norm - CONTAINMENT_SLACK {
            return Err(Error::Geometry(format!("atoms reach norm {max_norm}, outside B(0, {radius})")));
        }
        // A single atom at the origin still needs a positive bounding radius.
        let radius = if radius > 0.0 { radius } else { 1.0 };
        let cumulative = cumulative(&weights);
        Ok(Self { atoms, weights, radius, cumulative })
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub(crate) fn draw(&self, rng: &mut Rng) -> Point {
        self.atoms[pick(&self.cumulative, rng.random())].clone()
    }
}
