use rayon::prelude::*;

use crate::distributions::SAMPLE_CHUNK;
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, nearest_raw, Codebook, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydOptions {
    pub max_iter: usize,
    /// Stop once the relative risk decrease falls to this level.
    pub tol: f64,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub codebook: Codebook,
    pub risk: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Empty cells moved to a far point.
    pub reseeds: usize,
    /// Risk of the starting codebook followed by each accepted iterate.
    pub history: Vec<f64>,
}

struct Pass {
    risk: f64,
    sums: Vec<f64>,
    mass: Vec<f64>,
}

impl Pass {
    fn zero(k: usize, d: usize) -> Self {
        Self { risk: 0.0, sums: vec![0.0; k * d], mass: vec![0.0; k] }
    }

    fn absorb(&mut self, other: Pass) {
        self.risk += other.risk;
        self.sums.iter_mut().zip(other.sums).for_each(|(a, b)| *a += b);
        self.mass.iter_mut().zip(other.mass).for_each(|(a, b)| *a += b);
    }
}

fn weight(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

fn assignment_pass(c: &Codebook, pts: &[Point], weights: Option<&[f64]>, total: f64) -> Pass {
    let (k, d) = (c.k(), c.dim());
    let starts: Vec<usize> = (0..pts.len()).step_by(SAMPLE_CHUNK).collect();
    let parts: Vec<Pass> = starts
        .par_iter()
        .map(|&s| {
            let mut p = Pass::zero(k, d);
            let end = (s + SAMPLE_CHUNK).min(pts.len());
            for (i, x) in pts[s..end].iter().enumerate().map(|(o, x)| (s + o, x.coords())) {
                let w = weight(weights, i);
                let a = nearest_raw(c, x);
                p.risk += w * a.distance_sq;
                p.mass[a.index] += w;
                for (acc, x) in p.sums[a.index * d..(a.index + 1) * d].iter_mut().zip(x) {
                    *acc += w * x;
                }
            }
            p
        })
        .collect();
    let mut out = Pass::zero(k, d);
    for p in parts {
        out.absorb(p);
    }
    out.risk /= total;
    out
}

/// Lloyd iteration on an unweighted sample.
pub fn lloyd(c0: &Codebook, sample: &[Point], opts: LloydOptions) -> Result<LloydResult> {
    run(c0, sample, None, opts)
}

/// Lloyd iteration on a weighted point set; with probability weights this is
/// the population iteration of a finitely supported distribution.
pub fn lloyd_weighted(c0: &Codebook, points: &[Point], weights: &[f64], opts: LloydOptions) -> Result<LloydResult> {
    if points.len() != weights.len() {
        return Err(Error::InvalidParameter("points and weights differ in length".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
    }
    run(c0, points, Some(weights), opts)
}

fn run(c0: &Codebook, pts: &[Point], weights: Option<&[f64]>, opts: LloydOptions) -> Result<LloydResult> {
    if pts.is_empty() {
        return Err(Error::Empty("sample"));
    }
    for x in pts {
        if x.dim() != c0.dim() {
            return Err(Error::DimensionMismatch { expected: c0.dim(), found: x.dim() });
        }
    }
    let total = weights.map_or(pts.len() as f64, |w| w.iter().sum());
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("total weight must be positive".into()));
    }
    let (k, d) = (c0.k(), c0.dim());
    let mut c = c0.clone();
    let mut pass = assignment_pass(&c, pts, weights, total);
    let mut history = vec![pass.risk];
    let mut reseeds = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut rows: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                if pass.mass[j] > 0.0 {
                    pass.sums[j * d..(j + 1) * d].iter().map(|s| s / pass.mass[j]).collect()
                } else {
                    c.point(j).to_vec()
                }
            })
            .collect();
        let empty: Vec<usize> = (0..k).filter(|&j| pass.mass[j] <= 0.0).collect();
        if !empty.is_empty() {
            reseeds += reseed(&mut rows, &empty, pts, weights);
        }
        let next = Codebook::from_rows(rows)?;
        if next == c {
            converged = true;
            break;
        }
        let next_pass = assignment_pass(&next, pts, weights, total);
        assert!(
            next_pass.risk <= pass.risk * (1.0 + 1e-12) + f64::MIN_POSITIVE,
            "Lloyd risk increased from {} to {}",
            pass.risk,
            next_pass.risk
        );
        if next_pass.risk >= pass.risk {
            converged = true;
            break;
        }
        let decrease = pass.risk - next_pass.risk;
        c = next;
        pass = next_pass;
        history.push(pass.risk);
        if decrease <= opts.tol * history[history.len() - 2] {
            converged = true;
            break;
        }
    }
    Ok(LloydResult { codebook: c, risk: pass.risk, iterations, converged, reseeds, history })
}

/// Moves each empty cell, in index order, to the positive-weight point farthest
/// from the code points placed so far. Returns the number of cells moved.
fn reseed(rows: &mut [Vec<f64>], empty: &[usize], pts: &[Point], weights: Option<&[f64]>) -> usize {
    let live: Vec<usize> = (0..rows.len()).filter(|j| !empty.contains(j)).collect();
    let mut far: Vec<f64> =
        pts.iter().map(|x| live.iter().map(|&j| dist_sq(&rows[j], x.coords())).fold(f64::INFINITY, f64::min)).collect();
    let mut moved = 0;
    for &e in empty {
        let mut best: Option<usize> = None;
        for i in 0..pts.len() {
            if weight(weights, i) > 0.0 && best.is_none_or(|b| far[i] > far[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        if !(far[b] > 0.0) {
            break;
        }
        rows[e] = pts[b].coords().to_vec();
        moved += 1;
        for (f, x) in far.iter_mut().zip(pts) {
            *f = f.min(dist_sq(&rows[e], x.coords()));
        }
    }
    moved
}
