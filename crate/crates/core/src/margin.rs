//! Margin-condition quantities: `B`, `p_min`, the weight function `p(t)`,
//! margin verdicts, `κ₀`, ε-separation, the polynomial-margin radius, the
//! Gaussian polarization condition and the Voronoi-closeness audits.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{Distribution, UniformBall};
use crate::error::{invalid, Error, Result};
use crate::geometry::{critical_distance_raw, dist_sq, nearest_raw, Codebook, Point};
use crate::quantizer::{
    ball_respecting_assignment, erm_exhaustive_weighted, lloyd, lloyd_weighted, loss, partition_count,
    risk_difference_mc, true_risk, CodebookSet, Effort, LloydOptions, SetMethod, MIN_MC,
};
use crate::seed::{self, derive};
use crate::stats::binomial_se;

/// A probability with its standard error; exact values carry zero error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbEstimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
    pub n_eval: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::Fails => "fails",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginQuantities {
    pub b: f64,
    pub p_min: ProbEstimate,
}

/// Minimum pairwise distance between code points over all codebooks.
pub fn min_separation(optimal: &CodebookSet) -> Result<f64> {
    if optimal.is_empty() {
        return Err(Error::Empty("optimal codebook set"));
    }
    let mut b = f64::INFINITY;
    for c in optimal.codebooks() {
        b = b.min(c.min_separation().ok_or_else(|| invalid("B is undefined for k = 1"))?);
    }
    if b == 0.0 {
        return Err(Error::Geometry("optimal codebook has coincident points".into()));
    }
    Ok(b)
}

/// `B` and `p_min` over the codebooks of `optimal`.
///
/// Cell masses are exact for finite supports and for cone-ball mixtures whose
/// balls each sit inside one cell; otherwise they are Monte Carlo frequencies
/// and the standard error is that of the smallest cell.
pub fn margin_quantities(
    optimal: &CodebookSet,
    dist: &Distribution,
    n_mc: usize,
    seed: u64,
) -> Result<MarginQuantities> {
    let b = min_separation(optimal)?;
    let mut p_min: Option<ProbEstimate> = None;
    for (idx, c) in optimal.codebooks().iter().enumerate() {
        let masses = cell_masses(c, dist, n_mc, derive(seed, idx as u64))?;
        for m in masses {
            if p_min.is_none_or(|p| m.value < p.value) {
                p_min = Some(m);
            }
        }
    }
    Ok(MarginQuantities { b, p_min: p_min.expect("nonempty set") })
}

/// Probability of each Voronoi cell of `c` under `dist`.
pub fn cell_masses(c: &Codebook, dist: &Distribution, n_mc: usize, seed: u64) -> Result<Vec<ProbEstimate>> {
    if c.dim() != dist.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), found: dist.dim() });
    }
    let exact = |mass: Vec<f64>, n: usize| {
        mass.into_iter().map(|value| ProbEstimate { value, std_error: 0.0, exact: true, n_eval: n }).collect()
    };
    match dist {
        Distribution::FiniteSupport(f) => {
            let mut mass = vec![0.0; c.k()];
            for (a, w) in f.atoms().iter().zip(f.weights()) {
                mass[nearest_raw(c, a.coords()).index] += w;
            }
            return Ok(exact(mass, f.atoms().len()));
        }
        Distribution::ConeBall(cb) => {
            if let Some(cells) = ball_respecting_assignment(c, cb) {
                let mut mass = vec![0.0; c.k()];
                for (j, m) in cells.iter().zip(cb.masses()) {
                    mass[*j] += m;
                }
                return Ok(exact(mass, cb.centers().len()));
            }
        }
        _ => {}
    }
    if n_mc < MIN_MC {
        return Err(Error::TooFewSamples(n_mc));
    }
    let parts = dist.map_sample_chunks(n_mc, seed, |chunk| {
        let mut counts = vec![0usize; c.k()];
        for x in chunk {
            counts[nearest_raw(c, x.coords()).index] += 1;
        }
        counts
    });
    let mut counts = vec![0usize; c.k()];
    for p in parts {
        counts.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    Ok(counts
        .into_iter()
        .map(|n| {
            let value = n as f64 / n_mc as f64;
            ProbEstimate { value, std_error: binomial_se(value, n_mc), exact: false, n_eval: n_mc }
        })
        .collect())
}

/// Critical distances of one fixed sample (or of every atom), sorted, so that
/// `p(t)` can be read off for any `t` with nested, monotone counts.
#[derive(Debug, Clone)]
pub struct CriticalProfile {
    distances: Vec<f64>,
    /// Cumulative atom weights aligned with `distances` for finite supports.
    cumulative: Option<Vec<f64>>,
    n_eval: usize,
}

impl CriticalProfile {
    pub fn new(optimal: &CodebookSet, dist: &Distribution, n_mc: usize, seed: u64) -> Result<Self> {
        if optimal.is_empty() {
            return Err(Error::Empty("optimal codebook set"));
        }
        for c in optimal.codebooks() {
            if c.dim() != dist.dim() {
                return Err(Error::DimensionMismatch { expected: c.dim(), found: dist.dim() });
            }
            c.ensure_distinct()?;
        }
        let crit = |x: &[f64]| -> Result<f64> {
            let mut best = f64::INFINITY;
            for c in optimal.codebooks() {
                best = best.min(critical_distance_raw(c, x)?);
            }
            Ok(best)
        };
        if let Distribution::FiniteSupport(f) = dist {
            let mut pairs: Vec<(f64, f64)> =
                f.atoms().iter().zip(f.weights()).map(|(a, &w)| Ok((crit(a.coords())?, w))).collect::<Result<_>>()?;
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            let cumulative = pairs
                .iter()
                .map(|p| {
                    acc += p.1;
                    acc
                })
                .collect();
            return Ok(Self {
                distances: pairs.into_iter().map(|p| p.0).collect(),
                cumulative: Some(cumulative),
                n_eval: f.atoms().len(),
            });
        }
        if n_mc < MIN_MC {
            return Err(Error::TooFewSamples(n_mc));
        }
        let parts = dist.map_sample_chunks(n_mc, seed, |chunk| {
            chunk.iter().map(|x| crit(x.coords())).collect::<Result<Vec<f64>>>()
        });
        let mut distances = Vec::with_capacity(n_mc);
        for p in parts {
            distances.extend(p?);
        }
        distances.sort_by(f64::total_cmp);
        Ok(Self { distances, cumulative: None, n_eval: n_mc })
    }

    pub fn is_exact(&self) -> bool {
        self.cumulative.is_some()
    }

    /// `p̂(t)`: mass within distance `t` of a bisector of the owning cell.
    pub fn p(&self, t: f64) -> ProbEstimate {
        let count = self.distances.partition_point(|&d| d <= t);
        match &self.cumulative {
            Some(cum) => ProbEstimate {
                value: if count == 0 { 0.0 } else { cum[count - 1].min(1.0) },
                std_error: 0.0,
                exact: true,
                n_eval: self.n_eval,
            },
            None => {
                let value = count as f64 / self.n_eval as f64;
                ProbEstimate { value, std_error: binomial_se(value, self.n_eval), exact: false, n_eval: self.n_eval }
            }
        }
    }

    /// Smallest critical distance in the profile.
    pub fn min_distance(&self) -> f64 {
        self.distances.first().copied().unwrap_or(f64::INFINITY)
    }
}

/// `p(t)` for a single `t`.
pub fn weight_p(optimal: &CodebookSet, dist: &Distribution, t: f64, n_mc: usize, seed: u64) -> Result<ProbEstimate> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    Ok(CriticalProfile::new(optimal, dist, n_mc, seed)?.p(t))
}

/// Geometric grid of `size` points from `r0/1024` to `r0`.
pub fn margin_grid(r0: f64, size: usize) -> Vec<f64> {
    if size <= 1 {
        return vec![r0];
    }
    let lo = (r0 / 1024.0).ln();
    let step = (r0.ln() - lo) / (size - 1) as f64;
    let mut grid: Vec<f64> = (0..size).map(|i| (lo + step * i as f64).exp()).collect();
    grid[size - 1] = r0;
    grid
}

/// Right-hand side `B·p_min·t/(128M²)` of the margin inequality.
pub fn margin_bound(b: f64, p_min: f64, m: f64, t: f64) -> f64 {
    b * p_min * t / (128.0 * m * m)
}

/// Three-valued decision over a grid: holds when every `p̂ + 3SE` is within the
/// bound, fails when some `p̂ − 3SE` exceeds it.
pub fn verdict(p_hat: &[ProbEstimate], bounds: &[f64]) -> Verdict {
    let fails = p_hat.iter().zip(bounds).any(|(p, b)| p.value - 3.0 * p.std_error > *b);
    let holds = p_hat.iter().zip(bounds).all(|(p, b)| p.value + 3.0 * p.std_error <= *b);
    if fails {
        Verdict::Fails
    } else if holds {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    #[serde(rename = "B")]
    pub b: f64,
    pub p_min: ProbEstimate,
    #[serde(rename = "M")]
    pub m: f64,
    pub t_grid: Vec<f64>,
    pub p_hat: Vec<ProbEstimate>,
    pub bound: Vec<f64>,
    pub r0_tested: f64,
    pub verdict: Verdict,
    pub kappa0: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_mc: usize,
    pub seed: u64,
}

impl MarginReport {
    /// Records the separation and the resulting `κ₀`.
    pub fn attach_separation(&mut self, k: usize, epsilon: f64) -> Result<()> {
        self.kappa0 = Some(kappa0(k, self.m, epsilon, self.p_min.value, self.b, self.r0_tested)?);
        self.epsilon = Some(epsilon);
        Ok(())
    }
}

/// Evaluates `p̂` on the margin grid up to `r0` and applies the verdict rule.
pub fn margin_check(
    optimal: &CodebookSet,
    dist: &Distribution,
    r0: f64,
    grid_size: usize,
    n_mc: usize,
    seed: u64,
) -> Result<MarginReport> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidParameter(format!("r0 must be positive, got {r0}")));
    }
    let q = margin_quantities(optimal, dist, n_mc, derive(seed, 0))?;
    let profile = CriticalProfile::new(optimal, dist, n_mc, derive(seed, 1))?;
    Ok(report_from_profile(&q, &profile, dist.radius(), r0, grid_size, n_mc, seed))
}

pub(crate) fn report_from_profile(
    q: &MarginQuantities,
    profile: &CriticalProfile,
    m: f64,
    r0: f64,
    grid_size: usize,
    n_mc: usize,
    seed: u64,
) -> MarginReport {
    let t_grid = margin_grid(r0, grid_size);
    let p_hat: Vec<ProbEstimate> = t_grid.iter().map(|&t| profile.p(t)).collect();
    let bound: Vec<f64> = t_grid.iter().map(|&t| margin_bound(q.b, q.p_min.value, m, t)).collect();
    let verdict = verdict(&p_hat, &bound);
    MarginReport {
        b: q.b,
        p_min: q.p_min,
        m,
        t_grid,
        p_hat,
        bound,
        r0_tested: r0,
        verdict,
        kappa0: None,
        epsilon: None,
        n_mc,
        seed,
    }
}

/// Largest `r0 ≤ r_max` whose grid verdict is `holds`, located by bisection on
/// `ln r0` against one fixed critical profile. `None` when even tiny radii fail.
pub fn certified_radius(
    optimal: &CodebookSet,
    dist: &Distribution,
    r_max: f64,
    grid_size: usize,
    n_mc: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let q = margin_quantities(optimal, dist, n_mc, derive(seed, 0))?;
    let profile = CriticalProfile::new(optimal, dist, n_mc, derive(seed, 1))?;
    let m = dist.radius();
    let holds = |r: f64| report_from_profile(&q, &profile, m, r, grid_size, n_mc, seed).verdict == Verdict::Holds;
    if holds(r_max) {
        return Ok(Some(r_max));
    }
    let mut lo = r_max * 1e-9;
    if !holds(lo) {
        return Ok(None);
    }
    let mut hi = r_max;
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// `κ₀ = 4kM²·max(1/ε, 64M²/(p_min B² r₀²))`. `ε = +∞` is accepted and leaves
/// the second branch.
pub fn kappa0(k: usize, m: f64, epsilon: f64, p_min: f64, b: f64, r0: f64) -> Result<f64> {
    for (name, v) in [("M", m), ("epsilon", epsilon), ("p_min", p_min), ("B", b), ("r0", r0)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let k = k as f64;
    Ok(4.0 * k * m * m * (1.0 / epsilon).max(64.0 * m * m / (p_min * b * b * r0 * r0)))
}

/// Margin radius guaranteed when `p(x) ≤ Q x^q`.
pub fn polynomial_margin_radius(b: f64, m: f64, p_min: f64, q_const: f64, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
    }
    for (name, v) in [("B", b), ("M", m), ("p_min", p_min), ("Q", q_const)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let base = p_min * b / (16.0 * SQRT_2 * m * q_const);
    Ok(b / (4.0 * SQRT_2 * m) * base.powf(1.0 / (q - 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub stationary_points: CodebookSet,
    pub global_risk: f64,
    /// Smallest excess risk of a non-global stationary point; `+∞` if none.
    #[serde(serialize_with = "serialize_maybe_inf")]
    pub epsilon: f64,
    pub epsilon_se: f64,
    pub budget: usize,
    pub low_confidence: bool,
}

fn serialize_maybe_inf<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

/// Budgets below this mark a separation estimate as low confidence.
pub const CONFIDENT_BUDGET: usize = 50;

/// ε-separation by multistart Lloyd.
///
/// Finite supports and cone-ball mixtures run the exact population iteration
/// (on atoms, or on ball centers weighted by ball mass, keeping only fixed
/// points whose cells contain whole balls). Other families run on a Monte Carlo
/// sample of `effort.sample_size` points and classify by paired differences.
pub fn separation(dist: &Distribution, k: usize, budget: usize, effort: Effort, seed: u64) -> Result<SeparationReport> {
    if budget < 10 {
        return Err(Error::InvalidParameter(format!("separation budget {budget} is below 10")));
    }
    let (points, weights): (Vec<Point>, Option<Vec<f64>>) = match dist {
        Distribution::FiniteSupport(f) => (f.atoms().to_vec(), Some(f.weights().to_vec())),
        Distribution::ConeBall(cb) => (cb.centers().to_vec(), Some(cb.masses().to_vec())),
        _ => (dist.sample(effort.sample_size, derive(seed, 0))?, None),
    };
    if k > points.len() {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {} support points", points.len())));
    }
    let runs: Vec<Codebook> = (0..budget)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(derive(derive(seed, 1), r as u64));
            let idx = rand::seq::index::sample(&mut rng, points.len(), k).into_vec();
            let c0 = Codebook::new(idx.iter().map(|&i| points[i].clone()).collect())?;
            let run = match &weights {
                Some(w) => lloyd_weighted(&c0, &points, w, LloydOptions::default())?,
                None => lloyd(&c0, &points, LloydOptions::default())?,
            };
            Ok(run.codebook)
        })
        .collect::<Result<_>>()?;
    let eval_seed = derive(seed, 2);
    let mut found = CodebookSet::new(SetMethod::Approximate);
    for c in runs {
        if c.has_duplicates() {
            continue;
        }
        if let Distribution::ConeBall(cb) = dist {
            if ball_respecting_assignment(&c, cb).is_none() {
                continue;
            }
        }
        if !found.contains(&c) {
            let r = true_risk(&c, dist, effort.n_mc, eval_seed)?;
            found.insert(c, r);
        }
    }
    let mut global_risk = found.best_index().map_or(f64::INFINITY, |i| found.risks()[i].value);
    if let Distribution::FiniteSupport(f) = dist {
        if partition_count(f.atoms().len(), k) <= crate::quantizer::PARTITION_GUARD {
            let (best, _) = erm_exhaustive_weighted(f.atoms(), f.weights(), k)?;
            global_risk = global_risk.min(best);
        }
    }
    if let Some(opt) = dist.known_optimum(k) {
        let r = true_risk(&opt.codebooks[0], dist, effort.n_mc, eval_seed)?;
        global_risk = global_risk.min(r.value);
    }
    let mut epsilon = f64::INFINITY;
    let mut epsilon_se = 0.0;
    if let Some(best) = found.best_index() {
        let best_c = found.codebooks()[best].clone();
        for (c, r) in found.codebooks().iter().zip(found.risks()) {
            let (excess, se) = if r.method.is_exact() {
                (r.value - global_risk, 0.0)
            } else {
                let (diff, se) = risk_difference_mc(c, &best_c, dist, effort.n_mc, eval_seed)?;
                (diff + found.risks()[best].value - global_risk, se)
            };
            let non_global = if se > 0.0 { excess > 3.0 * se } else { excess > 1e-10 * global_risk.abs().max(1e-300) };
            if non_global && excess < epsilon {
                epsilon = excess;
                epsilon_se = se;
            }
        }
    }
    let low_confidence = budget < CONFIDENT_BUDGET || !epsilon.is_finite();
    Ok(SeparationReport { stationary_points: found, global_risk, epsilon, epsilon_se, budget, low_confidence })
}

/// Best codebooks of repeated independent searches, grouped into clusters of
/// radius `tol` modulo relabeling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumSpread {
    pub searches: usize,
    pub clusters: usize,
    pub tol: f64,
    pub leaders: Vec<Codebook>,
}

/// Runs `searches` independent optimal-codebook searches, each on its own
/// sample, and clusters their best codebooks greedily. A finite optimal set
/// yields at most its cardinality of clusters; a continuum keeps producing new
/// ones.
pub fn optimum_spread(
    dist: &Distribution,
    k: usize,
    searches: usize,
    effort: Effort,
    tol: f64,
    seed: u64,
) -> Result<OptimumSpread> {
    if searches == 0 || !(tol > 0.0) {
        return Err(invalid("the spread needs at least one search and a positive tolerance"));
    }
    let bests: Vec<Codebook> = (0..searches)
        .map(|s| {
            let set = crate::quantizer::optimal_codebooks(dist, k, effort, derive(seed, s as u64))?;
            let i = set.best_index().ok_or(Error::Empty("optimal codebook set"))?;
            Ok(set.codebooks()[i].clone())
        })
        .collect::<Result<_>>()?;
    let mut leaders: Vec<Codebook> = Vec::new();
    for c in bests {
        let mut far = true;
        for l in &leaders {
            far &= relabeled_distance_sq(&c, l)?.sqrt() > tol;
        }
        if far {
            leaders.push(c);
        }
    }
    Ok(OptimumSpread { searches, clusters: leaders.len(), tol, leaders })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianCondition {
    pub holds: bool,
    pub ratio: f64,
    pub term1: f64,
    pub term2: f64,
}

/// The polarization condition on `θ_min/θ_max` for truncated planar Gaussian
/// mixtures. The second term is evaluated in log space so that huge exponents
/// send it to zero instead of overflowing.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_condition(
    theta_min: f64,
    theta_max: f64,
    k: usize,
    sigma: f64,
    b_tilde: f64,
    m: f64,
    eps_trunc: f64,
) -> Result<GaussianCondition> {
    for (name, v) in
        [("theta_min", theta_min), ("theta_max", theta_max), ("sigma", sigma), ("B_tilde", b_tilde), ("M", m)]
    {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(0.0..1.0).contains(&eps_trunc) {
        return Err(Error::InvalidParameter(format!("eps_trunc must lie in [0, 1), got {eps_trunc}")));
    }
    let k = k as f64;
    let s2 = sigma * sigma;
    let b2 = b_tilde * b_tilde;
    let one_minus = 1.0 - eps_trunc;
    let term1 = 2048.0 * k * s2 / (one_minus * b2 * -(-b2 / (2048.0 * s2)).exp_m1());
    let a = b2 / (32.0 * s2);
    let ln_expm1 = if a > 1.0 { a + (-(-a).exp()).ln_1p() } else { a.exp_m1().ln() };
    let ln_term2 = (2048.0 * k * k * m.powi(3)).ln() - (one_minus * 7.0 * s2 * b_tilde).ln() - ln_expm1;
    let term2 = ln_term2.exp();
    let ratio = theta_min / theta_max;
    Ok(GaussianCondition { holds: ratio >= term1.max(term2), ratio, term1, term2 })
}

/// `2k·θ_max·σ²/(1−ε)`, the bound on the risk of the mixture means.
pub fn gaussian_risk_bound(k: usize, theta_max: f64, sigma: f64, eps_trunc: f64) -> f64 {
    2.0 * k as f64 * theta_max * sigma * sigma / (1.0 - eps_trunc)
}

/// `θ_min(1 − e^{−9B̃²/(128σ²)})`, the lower bound on `p_min`.
pub fn gaussian_pmin_lower(theta_min: f64, sigma: f64, b_tilde: f64) -> f64 {
    theta_min * -(-9.0 * b_tilde * b_tilde / (128.0 * sigma * sigma)).exp_m1()
}

/// `4kπMx`, the bound on the Lebesgue measure of `N*(x)` in the plane.
pub fn critical_area_bound(k: usize, m: f64, x: f64) -> f64 {
    4.0 * k as f64 * PI * m * x
}

/// Monte Carlo area of the tested neighbourhood `{d ≤ x}` inside `B(0, M)`
/// in the plane, with its standard error.
pub fn critical_area_mc(optimal: &CodebookSet, m: f64, x: f64, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    let disk: Distribution = UniformBall::new(m, 2)?.into();
    let p = weight_p(optimal, &disk, x, n_mc, seed)?;
    let area = PI * m * m;
    Ok((p.value * area, p.std_error * area))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyInequalityAudit {
    pub trials: usize,
    pub violations: usize,
    /// Largest observed `‖c − c*(c)‖² / ℓ(c, c*)` over trials with positive loss.
    pub worst_ratio: f64,
    pub worst_codebook: Option<Codebook>,
    pub kappa0: f64,
}

/// Squared distance from `c` to the nearest relabeling of any optimal codebook.
pub fn distance_to_optimal(c: &Codebook, optimal: &CodebookSet) -> Result<f64> {
    let mut best = f64::INFINITY;
    for star in optimal.codebooks() {
        best = best.min(relabeled_distance_sq(c, star)?);
    }
    Ok(best)
}

/// `min_π Σ_i ‖a_i − b_π(i)‖²` over relabelings `π`.
fn relabeled_distance_sq(a: &Codebook, b: &Codebook) -> Result<f64> {
    if a.k() > 8 {
        return Err(Error::SizeGuard { count: (1..=a.k() as u128).product(), limit: 40_320 });
    }
    if b.k() != a.k() || b.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: b.k() * b.dim(), found: a.k() * a.dim() });
    }
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..a.k()).collect();
    permute(&mut perm, 0, &mut |p| {
        let d: f64 = p.iter().enumerate().map(|(i, &j)| dist_sq(a.point(i), b.point(j))).sum();
        best = best.min(d);
    });
    Ok(best)
}

fn permute(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

/// Checks `‖c − c*(c)‖² ≤ κ₀·(ℓ(c, c*) + 3SE)` on each given codebook.
pub fn key_inequality_probe(
    dist: &Distribution,
    optimal: &CodebookSet,
    kappa0: f64,
    probes: &[Codebook],
    n_mc: usize,
    seed: u64,
) -> Result<KeyInequalityAudit> {
    if !(kappa0 > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa0 must be positive, got {kappa0}")));
    }
    let rows: Vec<(f64, f64, f64)> = probes
        .par_iter()
        .enumerate()
        .map(|(t, c)| {
            let lhs = distance_to_optimal(c, optimal)?;
            let l = loss(c, dist, optimal, n_mc, derive(seed, t as u64))?;
            Ok((lhs, l.value, l.std_error))
        })
        .collect::<Result<_>>()?;
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst = None;
    for (i, &(lhs, l, se)) in rows.iter().enumerate() {
        if lhs > kappa0 * (l + 3.0 * se) {
            violations += 1;
        }
        if l > 0.0 && lhs / l > worst_ratio {
            worst_ratio = lhs / l;
            worst = Some(probes[i].clone());
        }
    }
    Ok(KeyInequalityAudit { trials: probes.len(), violations, worst_ratio, worst_codebook: worst, kappa0 })
}

/// Uniform point of `B(0, M)` in dimension `d`.
fn ball_point(rng: &mut seed::Rng, d: usize, m: f64) -> Vec<f64> {
    crate::distributions::uniform_in_ball(rng, &vec![0.0; d], m)
}

/// The key-inequality audit on `trials` codebooks with points drawn uniformly
/// from `B(0, M)`.
pub fn key_inequality_audit(
    dist: &Distribution,
    optimal: &CodebookSet,
    kappa0: f64,
    trials: usize,
    n_mc: usize,
    seed: u64,
) -> Result<KeyInequalityAudit> {
    let k = optimal.codebooks().first().ok_or(Error::Empty("optimal codebook set"))?.k();
    let (d, m) = (dist.dim(), dist.radius());
    let probes: Vec<Codebook> = (0..trials)
        .map(|t| {
            let mut rng = seed::rng(derive(seed, t as u64));
            Codebook::from_rows((0..k).map(|_| ball_point(&mut rng, d, m)).collect())
        })
        .collect::<Result<_>>()?;
    key_inequality_probe(dist, optimal, kappa0, &probes, n_mc, derive(seed, u64::MAX))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VoronoiAudit {
    pub trials: usize,
    pub vor1_violations: usize,
    pub vor2_violations: usize,
    /// Largest left-to-right ratio seen for each inequality.
    pub vor1_worst: f64,
    pub vor2_worst: f64,
}

/// Audits the two boundary-closeness inequalities on `trials` triples
/// `(c, c*, x)` in `B(0, M)^k × B(0, M)^k × B(0, M)` with `x ∈ V_i(c*) ∩ V_j(c)`,
/// `i ≠ j`. Half the triples take `c` independent of `c*`; the rest perturb
/// `c*` at a log-uniform scale in `[1e−3, 1]`. Triples with equal labels are
/// redrawn.
pub fn voronoi_audit(trials: usize, k: usize, d: usize, m: f64, tol: f64, seed: u64) -> Result<VoronoiAudit> {
    if k < 2 {
        return Err(invalid("the audit needs k ≥ 2"));
    }
    let rows: Vec<[f64; 4]> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(derive(seed, t as u64));
            loop {
                let star_rows: Vec<Vec<f64>> = (0..k).map(|_| ball_point(&mut rng, d, m)).collect();
                let c_rows: Vec<Vec<f64>> = if t % 2 == 0 {
                    (0..k).map(|_| ball_point(&mut rng, d, m)).collect()
                } else {
                    let scale = 10f64.powf(rng.random_range(-3.0..0.0));
                    star_rows.iter().map(|p| perturb_in_ball(&mut rng, p, scale, m)).collect()
                };
                let x = ball_point(&mut rng, d, m);
                let star = Codebook::from_rows(star_rows)?;
                let c = Codebook::from_rows(c_rows)?;
                let i = nearest_raw(&star, &x).index;
                let j = nearest_raw(&c, &x).index;
                let b = star.min_separation().unwrap_or(0.0);
                if i == j || b == 0.0 {
                    continue;
                }
                let gap: f64 = (0..k).map(|l| dist_sq(c.point(l), star.point(l))).sum::<f64>().sqrt();
                let (ci, cj) = (c.point(i), c.point(j));
                let lhs1: f64 = x
                    .iter()
                    .zip(ci.iter().zip(cj))
                    .map(|(xv, (a, b))| (xv - 0.5 * (a + b)) * (a - b))
                    .sum::<f64>()
                    .abs();
                let lhs2 = crate::geometry::bisector_distance(&star, i, j, &Point::from_vec(x))?;
                return Ok([lhs1, 4.0 * SQRT_2 * m * gap, lhs2, 4.0 * SQRT_2 * m / b * gap]);
            }
        })
        .collect::<Result<_>>()?;
    let mut audit = VoronoiAudit { trials, vor1_violations: 0, vor2_violations: 0, vor1_worst: 0.0, vor2_worst: 0.0 };
    for [l1, r1, l2, r2] in rows {
        audit.vor1_violations += usize::from(l1 > r1 + tol);
        audit.vor2_violations += usize::from(l2 > r2 + tol);
        audit.vor1_worst = audit.vor1_worst.max(l1 / r1);
        audit.vor2_worst = audit.vor2_worst.max(l2 / r2);
    }
    Ok(audit)
}

fn perturb_in_ball(rng: &mut seed::Rng, p: &[f64], scale: f64, m: f64) -> Vec<f64> {
    let q: Vec<f64> = p.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > m {
        q.iter().map(|v| v * m / n).collect()
    } else {
        q
    }
}
