use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::{lloyd, lloyd_weighted, LloydOptions, LloydResult};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Codebook, Point};
use crate::seed;

/// Largest number of set partitions `erm_exhaustive` will enumerate.
pub const PARTITION_GUARD: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErmMethod {
    Exhaustive,
    Multistart,
}

impl ErmMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exhaustive => "exhaustive",
            Self::Multistart => "multistart",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmSolution {
    pub codebook: Codebook,
    pub risk: f64,
    pub method: ErmMethod,
    /// Lloyd chains run; zero for the exhaustive oracle.
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// `restarts` random k-subsets of the sample, drawn without replacement.
    Random { restarts: usize },
    /// Every k-subset of sample indices, in lexicographic order.
    AllSubsets,
}

/// Number of partitions of `n` items into at most `k` nonempty blocks,
/// saturating at `u128::MAX`.
pub fn partition_count(n: usize, k: usize) -> u128 {
    // Row of Stirling numbers of the second kind, S(i, j) for j ≤ k.
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for _ in 0..n {
        for j in (1..=k).rev() {
            row[j] = (j as u128).saturating_mul(row[j]).saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[1..].iter().fold(0u128, |a, &b| a.saturating_add(b))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

fn lex_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else { return out };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {n} available points")));
    }
    Ok(())
}

/// Best of `restarts` Lloyd chains from random k-subsets of the sample.
pub fn erm_multistart(sample: &[Point], k: usize, restarts: usize, seed: u64) -> Result<ErmSolution> {
    erm_multistart_with(sample, k, InitStrategy::Random { restarts }, seed, LloydOptions::default())
}

pub fn erm_multistart_with(
    sample: &[Point],
    k: usize,
    init: InitStrategy,
    seed: u64,
    opts: LloydOptions,
) -> Result<ErmSolution> {
    multistart(sample, None, k, init, seed, opts)
}

pub(crate) fn multistart(
    points: &[Point],
    weights: Option<&[f64]>,
    k: usize,
    init: InitStrategy,
    seed: u64,
    opts: LloydOptions,
) -> Result<ErmSolution> {
    Ok(multistart_all(points, weights, k, init, seed, opts)?.0)
}

/// All chain outputs in restart order, plus the best one (lowest restart index
/// on ties).
pub(crate) fn multistart_all(
    points: &[Point],
    weights: Option<&[f64]>,
    k: usize,
    init: InitStrategy,
    seed: u64,
    opts: LloydOptions,
) -> Result<(ErmSolution, Vec<LloydResult>)> {
    let n = points.len();
    check_k(k, n)?;
    let inits: Vec<Vec<usize>> = match init {
        InitStrategy::Random { restarts } => {
            if restarts == 0 {
                return Err(Error::InvalidParameter("restarts must be at least 1".into()));
            }
            (0..restarts)
                .map(|r| index::sample(&mut seed::rng(seed::derive(seed, r as u64)), n, k).into_vec())
                .collect()
        }
        InitStrategy::AllSubsets => {
            let count = binomial(n, k);
            if count > PARTITION_GUARD {
                return Err(Error::SizeGuard { count, limit: PARTITION_GUARD });
            }
            lex_subsets(n, k)
        }
    };
    let runs: Vec<LloydResult> = inits
        .par_iter()
        .map(|idx| {
            let c0 = Codebook::new(idx.iter().map(|&i| points[i].clone()).collect())?;
            match weights {
                Some(w) => lloyd_weighted(&c0, points, w, opts),
                None => lloyd(&c0, points, opts),
            }
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.risk < runs[best].risk {
            best = r;
        }
    }
    let solution = ErmSolution {
        codebook: runs[best].codebook.clone(),
        risk: runs[best].risk,
        method: ErmMethod::Multistart,
        restarts: runs.len(),
    };
    Ok((solution, runs))
}

/// Global empirical risk minimizer by enumerating every partition of the
/// sample into at most `k` groups.
pub fn erm_exhaustive(sample: &[Point], k: usize) -> Result<ErmSolution> {
    let w = vec![1.0 / sample.len().max(1) as f64; sample.len()];
    let (risk, mut optima) = erm_exhaustive_weighted(sample, &w, k)?;
    Ok(ErmSolution { codebook: optima.swap_remove(0), risk, method: ErmMethod::Exhaustive, restarts: 0 })
}

/// Weighted partition enumeration. Returns the minimal weighted within-group
/// sum of squares and every centroid codebook attaining it (relative tolerance
/// 1e−10), in enumeration order. Codebooks with fewer groups than `k` are
/// padded by repeating their first point.
pub fn erm_exhaustive_weighted(points: &[Point], weights: &[f64], k: usize) -> Result<(f64, Vec<Codebook>)> {
    if points.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if points.len() != weights.len() {
        return Err(Error::InvalidParameter("points and weights differ in length".into()));
    }
    let d = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    let count = partition_count(points.len(), k);
    if count > PARTITION_GUARD {
        return Err(Error::SizeGuard { count, limit: PARTITION_GUARD });
    }
    let mut search =
        Search { points, weights, k, d, labels: vec![0; points.len()], best: f64::INFINITY, optima: Vec::new() };
    search.descend(0, 0);
    let Search { best, optima, .. } = search;
    let codebooks =
        optima.into_iter().map(|labels| centroids(points, weights, &labels, k, d)).collect::<Result<_>>()?;
    Ok((best, codebooks))
}

const TIE_REL: f64 = 1e-10;
const MAX_TIES: usize = 1024;

struct Search<'a> {
    points: &'a [Point],
    weights: &'a [f64],
    k: usize,
    d: usize,
    labels: Vec<usize>,
    best: f64,
    optima: Vec<Vec<usize>>,
}

impl Search<'_> {
    /// Restricted growth strings: item `i` joins an existing group or opens
    /// group `used`.
    fn descend(&mut self, i: usize, used: usize) {
        if i == self.points.len() {
            self.leaf(used);
            return;
        }
        for b in 0..(used + 1).min(self.k) {
            self.labels[i] = b;
            self.descend(i + 1, used.max(b + 1));
        }
    }

    fn leaf(&mut self, used: usize) {
        let (sums, mass) = group_sums(self.points, self.weights, &self.labels, used, self.d);
        let mut risk = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            let g = self.labels[i];
            let centroid: Vec<f64> = sums[g * self.d..(g + 1) * self.d].iter().map(|s| s / mass[g]).collect();
            risk += self.weights[i] * dist_sq(p.coords(), &centroid);
        }
        let tol = if self.best.is_finite() { TIE_REL * self.best } else { 0.0 };
        if risk < self.best - tol {
            self.best = risk;
            self.optima.clear();
            self.optima.push(self.labels.clone());
        } else if risk <= self.best + tol && self.optima.len() < MAX_TIES {
            self.optima.push(self.labels.clone());
        }
    }
}

fn group_sums(points: &[Point], weights: &[f64], labels: &[usize], groups: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sums = vec![0.0; groups * d];
    let mut mass = vec![0.0; groups];
    for (i, p) in points.iter().enumerate() {
        let g = labels[i];
        mass[g] += weights[i];
        for (acc, x) in sums[g * d..(g + 1) * d].iter_mut().zip(p.coords()) {
            *acc += weights[i] * x;
        }
    }
    (sums, mass)
}

fn centroids(points: &[Point], weights: &[f64], labels: &[usize], k: usize, d: usize) -> Result<Codebook> {
    let groups = labels.iter().max().map_or(0, |m| m + 1);
    let (sums, mass) = group_sums(points, weights, labels, groups, d);
    let mut rows: Vec<Vec<f64>> =
        (0..groups).map(|g| sums[g * d..(g + 1) * d].iter().map(|s| s / mass[g]).collect()).collect();
    while rows.len() < k {
        rows.push(rows[0].clone());
    }
    Codebook::from_rows(rows)
}
