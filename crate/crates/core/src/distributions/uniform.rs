use serde::Serialize;

use super::uniform_in_ball;
use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, Point};
use crate::seed::Rng;

/// Uniform distribution on `B(0, M)` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBall {
    radius: f64,
    dim: usize,
}

impl UniformBall {
    pub fn new(radius: f64, dim: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { radius, dim })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn density(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > self.radius * self.radius {
            0.0
        } else {
            1.0 / (unit_ball_volume(self.dim) * self.radius.powi(self.dim as i32))
        }
    }

    pub(crate) fn draw(&self, rng: &mut Rng) -> Point {
        Point::from_vec(uniform_in_ball(rng, &vec![0.0; self.dim], self.radius))
    }
}
