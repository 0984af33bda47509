//! The adversarial cone-ball family: lattice nets, the distributions `P_σ`,
//! their quantizers `Q_σ`, closed-form risks, Hellinger affinities, the
//! quantizer reduction onto `{Q_σ}` and the minimax rate experiment.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::distributions::{cone_cell_moment, uniform_in_ball, ConeBallDistribution, Distribution, KnownOptimum};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dist_sq, Codebook, Point};
use crate::quantizer::{
    canonical_distance, empirical_risk, lloyd, risk_difference_mc, true_risk, LloydOptions, RiskEstimate, RiskMethod,
};
use crate::seed::{self, derive, mix};
use crate::stats::{fit_loglog, mean_se, SlopeFit};

/// Largest number of lattice points visited while building a net.
const LATTICE_GUARD: usize = 1_000_000;

/// Largest `m` for which all balanced sign vectors are enumerated.
pub const BALANCED_ENUMERATION_MAX_M: usize = 20;

/// Default cap on the number of sign patterns in a minimax sweep.
pub const PATTERN_CAP: usize = 64;

/// The family `{P_σ}` built on `m = 2k/3` pairs of balls `U_i = B(z_i, ρ)`,
/// `U'_i = B(z_i + w_i, ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarialFamily {
    k: usize,
    d: usize,
    #[serde(rename = "M")]
    radius: f64,
    n_target: Option<usize>,
    #[serde(rename = "Delta")]
    big_delta: f64,
    rho: f64,
    delta: f64,
    z: Vec<Point>,
    w: Vec<Point>,
    m: usize,
    delta_clamped: bool,
}

/// `√m / (2√n)`, the δ tuned to sample size `n`.
pub fn tuned_delta(m: usize, n: usize) -> f64 {
    (m as f64).sqrt() / (2.0 * (n as f64).sqrt())
}

/// Builds the family for sample size `n` with `δ = min(√m/(2√n), 1/3)`.
pub fn build_family(k: usize, d: usize, radius: f64, n: usize) -> Result<AdversarialFamily> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let m = pair_count(k)?;
    let raw = tuned_delta(m, n);
    let clamped = raw > 1.0 / 3.0;
    if clamped {
        tracing::warn!(k, n, delta = raw, "delta exceeds 1/3 and is clamped");
    }
    let mut fam = AdversarialFamily::with_delta(k, d, radius, raw.min(1.0 / 3.0))?;
    fam.n_target = Some(n);
    fam.delta_clamped = clamped;
    Ok(fam)
}

fn pair_count(k: usize) -> Result<usize> {
    if k < 3 || !k.is_multiple_of(3) {
        return Err(invalid(format!("k must be a positive multiple of 3, got {k}")));
    }
    Ok(2 * k / 3)
}

/// Lattice points of pitch `pitch` inside `B(0, r)` in dimension `d`, ordered
/// by norm and then lexicographically by integer coordinates; at most `need`
/// are returned.
fn lattice_net(d: usize, pitch: f64, r: f64, need: usize) -> Result<Vec<Point>> {
    let reach = (r / pitch).floor() as i64;
    let limit = (r / pitch).powi(2) * (1.0 + 1e-12);
    let mut found: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut prefix = Vec::with_capacity(d);
    let mut visited = 0usize;
    fn walk(
        d: usize,
        reach: i64,
        limit: f64,
        prefix: &mut Vec<i64>,
        norm2: f64,
        found: &mut Vec<(f64, Vec<i64>)>,
        visited: &mut usize,
    ) -> Result<()> {
        *visited += 1;
        if *visited > LATTICE_GUARD {
            return Err(Error::SizeGuard { count: *visited as u128, limit: LATTICE_GUARD as u128 });
        }
        if prefix.len() == d {
            found.push((norm2, prefix.clone()));
            return Ok(());
        }
        for v in -reach..=reach {
            let n2 = norm2 + (v * v) as f64;
            if n2 <= limit {
                prefix.push(v);
                walk(d, reach, limit, prefix, n2, found, visited)?;
                prefix.pop();
            }
        }
        Ok(())
    }
    walk(d, reach, limit, &mut prefix, 0.0, &mut found, &mut visited)?;
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    if found.len() < need {
        return Err(Error::Packing { needed: need, achieved: found.len() });
    }
    Ok(found
        .into_iter()
        .take(need)
        .map(|(_, v)| Point::from_vec(v.iter().map(|&i| i as f64 * pitch).collect()))
        .collect())
}

impl AdversarialFamily {
    /// Builds the family with a fixed `δ ∈ [0, 1/3]` and no target sample size.
    pub fn with_delta(k: usize, d: usize, radius: f64, delta: f64) -> Result<Self> {
        let m = pair_count(k)?;
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("M must be positive, got {radius}")));
        }
        if !(0.0..=1.0 / 3.0).contains(&delta) {
            return Err(invalid(format!("delta must lie in [0, 1/3], got {delta}")));
        }
        let big_delta = 15.0 * radius / (96.0 * (m as f64).powf(1.0 / d as f64));
        let rho = big_delta / 16.0;
        let z = lattice_net(d, 6.0 * big_delta, radius - rho - big_delta, m)?;
        let mut e1 = vec![0.0; d];
        e1[0] = big_delta;
        let w = vec![Point::from_vec(e1); m];
        Ok(Self { k, d, radius, n_target: None, big_delta, rho, delta, z, w, m, delta_clamped: false })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Support radius `M`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of ball pairs `m = 2k/3`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Pair offset length `Δ = 15M / (96 m^{1/d})`.
    pub fn big_delta(&self) -> f64 {
        self.big_delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delta_clamped(&self) -> bool {
        self.delta_clamped
    }

    pub fn n_target(&self) -> Option<usize> {
        self.n_target
    }

    pub fn z(&self) -> &[Point] {
        &self.z
    }

    pub fn w(&self) -> &[Point] {
        &self.w
    }

    /// `z_i + w_i`.
    pub fn partner(&self, i: usize) -> Vec<f64> {
        self.z[i].coords().iter().zip(self.w[i].coords()).map(|(a, b)| a + b).collect()
    }

    /// `z_i + w_i/2`.
    pub fn midpoint(&self, i: usize) -> Vec<f64> {
        self.z[i].coords().iter().zip(self.w[i].coords()).map(|(a, b)| a + 0.5 * b).collect()
    }

    /// Ball centres in the order `z_1, z_1 + w_1, z_2, z_2 + w_2, …`.
    pub fn centers(&self) -> Vec<Point> {
        (0..self.m).flat_map(|i| [self.z[i].clone(), Point::from_vec(self.partner(i))]).collect()
    }

    /// Separation `ε = Δ²δ/(2m)` of each `P_σ`.
    pub fn epsilon(&self) -> f64 {
        self.big_delta * self.big_delta * self.delta / (2.0 * self.m as f64)
    }

    /// Radius `Δ/2 − ρ = 7Δ/16` on which the weight function of `P_σ` vanishes.
    pub fn margin_radius(&self) -> f64 {
        self.big_delta / 2.0 - self.rho
    }

    /// Ball masses `p_± = (1 ± δ)/(2m)`.
    pub fn ball_mass(&self, sign: i8) -> f64 {
        (1.0 + f64::from(sign) * self.delta) / (2.0 * self.m as f64)
    }

    fn check_signs(&self, s: &SignVector) -> Result<()> {
        if s.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: s.len() });
        }
        Ok(())
    }

    /// Pair index `i` whose region `V_i` contains `x`: the nearest ball centre
    /// is `z_i` or `z_i + w_i`, first index on ties.
    pub fn pair_of(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.m {
            let a = dist_sq(x, self.z[i].coords());
            let b = dist_sq(x, &self.partner(i));
            let v = a.min(b);
            if v < best.0 {
                best = (v, i);
            }
        }
        best.1
    }
}

/// A sign vector `σ ∈ {−1, +1}^m` with `Σσ_i = 0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Empty("sign vector"));
        }
        if let Some(s) = signs.iter().find(|s| !matches!(s, -1 | 1)) {
            return Err(invalid(format!("signs must be ±1, found {s}")));
        }
        let sum: i64 = signs.iter().map(|&s| i64::from(s)).sum();
        if sum != 0 {
            return Err(Error::UnbalancedSigns(sum));
        }
        Ok(Self(signs))
    }

    /// `σ(τ)`: `σ_i = τ_i` and `σ_{i+h} = −τ_i` for `h = |τ|`.
    pub fn from_tau(tau: &[i8]) -> Result<Self> {
        let mut s = tau.to_vec();
        s.extend(tau.iter().map(|t| -t));
        Self::new(s)
    }

    /// Parses a string of `+` and `-` characters.
    pub fn parse(id: &str) -> Result<Self> {
        let signs = id
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(invalid(format!("unexpected sign character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(signs)
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `ρ(σ, σ') = Σ|σ_i − σ'_i|`.
    pub fn rho_distance(&self, other: &SignVector) -> u32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).unsigned_abs() as u32).sum()
    }

    /// Compact identifier such as `+-+-`.
    pub fn id(&self) -> String {
        self.0.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl Serialize for SignVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

/// Every balanced sign vector of length `m`, in lexicographic order with `−1`
/// before `+1`.
pub fn balanced_signs(m: usize) -> Result<Vec<SignVector>> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(invalid(format!("m must be positive and even, got {m}")));
    }
    if m > BALANCED_ENUMERATION_MAX_M {
        return Err(Error::SizeGuard { count: 1u128 << m, limit: 1u128 << BALANCED_ENUMERATION_MAX_M });
    }
    let mut out = Vec::new();
    for bits in 0u32..(1u32 << m) {
        if bits.count_ones() as usize == m / 2 {
            out.push(SignVector((0..m).rev().map(|b| if bits >> b & 1 == 1 { 1 } else { -1 }).collect()));
        }
    }
    Ok(out)
}

/// The patterns `σ(τ)` for `τ ∈ {−1, +1}^{m/2}`. When there are more than
/// `cap` of them a seeded subset of size `cap` is returned; the flag reports
/// whether subsampling happened.
pub fn tau_patterns(m: usize, cap: usize, seed: u64) -> Result<(Vec<SignVector>, bool)> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(invalid(format!("m must be positive and even, got {m}")));
    }
    if cap == 0 {
        return Err(invalid("pattern cap must be at least 1"));
    }
    let h = m / 2;
    let from_bits = |bits: &dyn Fn(usize) -> bool| -> Result<SignVector> {
        let tau: Vec<i8> = (0..h).map(|i| if bits(i) { -1 } else { 1 }).collect();
        SignVector::from_tau(&tau)
    };
    let total = if h < 63 { Some(1u64 << h) } else { None };
    if let Some(t) = total.filter(|&t| t <= cap as u64) {
        let pats = (0..t).map(|b| from_bits(&|i| b >> (h - 1 - i) & 1 == 1)).collect::<Result<_>>()?;
        return Ok((pats, false));
    }
    let mut rng = seed::rng(seed);
    let mut chosen: BTreeSet<Vec<bool>> = BTreeSet::new();
    match total {
        Some(t) => {
            for idx in rand::seq::index::sample(&mut rng, t as usize, cap) {
                chosen.insert((0..h).map(|i| (idx as u64) >> (h - 1 - i) & 1 == 1).collect());
            }
        }
        None => {
            while chosen.len() < cap {
                chosen.insert((0..h).map(|_| rng.random::<bool>()).collect());
            }
        }
    }
    let pats = chosen.iter().map(|v| from_bits(&|i| v[i])).collect::<Result<_>>()?;
    Ok((pats, true))
}

/// `P_σ`: cone balls with masses `(1 + σ_iδ)/(2m)` on `U_i` and `U'_i`. The
/// distribution carries `Q_σ` as its optimum, the radius `7Δ/16` and the
/// separation `Δ²δ/(2m)`; with `δ = 0` every member of `𝓠` is optimal.
pub fn p_sigma(fam: &AdversarialFamily, sigma: &SignVector) -> Result<ConeBallDistribution> {
    fam.check_signs(sigma)?;
    let masses: Vec<f64> = sigma.signs().iter().flat_map(|&s| [fam.ball_mass(s); 2]).collect();
    let dist = ConeBallDistribution::new(fam.centers(), fam.rho, masses, fam.radius)?;
    let (codebooks, separation) = if fam.delta > 0.0 {
        (vec![q_sigma(fam, sigma)?], fam.epsilon())
    } else {
        let all = balanced_signs(fam.m)?;
        (all.iter().map(|s| q_sigma(fam, s)).collect::<Result<_>>()?, f64::INFINITY)
    };
    Ok(dist.with_known_optimum(KnownOptimum { codebooks, margin_radius: fam.margin_radius(), separation }))
}

/// `Q_σ`: the pair `{z_i, z_i + w_i}` where `σ_i = +1` and the midpoint
/// `z_i + w_i/2` where `σ_i = −1`.
pub fn q_sigma(fam: &AdversarialFamily, sigma: &SignVector) -> Result<Codebook> {
    fam.check_signs(sigma)?;
    let mut rows = Vec::with_capacity(fam.k);
    for (i, &s) in sigma.signs().iter().enumerate() {
        if s > 0 {
            rows.push(fam.z[i].coords().to_vec());
            rows.push(fam.partner(i));
        } else {
            rows.push(fam.midpoint(i));
        }
    }
    Codebook::from_rows(rows)
}

/// `R(Q_{σ_q}, P_{σ_p}) = μ_d(ρ) + (1 − δ)Δ²/8 + (Δ²δ/(8m))·ρ(σ_p, σ_q)`.
pub fn closed_risk(fam: &AdversarialFamily, sigma_q: &SignVector, sigma_p: &SignVector) -> Result<f64> {
    fam.check_signs(sigma_q)?;
    fam.check_signs(sigma_p)?;
    let d2 = fam.big_delta * fam.big_delta;
    let gap = d2 * fam.delta / (8.0 * fam.m as f64) * f64::from(sigma_p.rho_distance(sigma_q));
    Ok(cone_cell_moment(fam.rho, fam.d) + (1.0 - fam.delta) * d2 / 8.0 + gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HellingerReport {
    /// `Σ_balls √(P_σ(U)·P_σ'(U))`.
    pub affinity: f64,
    /// `1 + (2/m)(√(1 − δ²) − 1)`, reported when `ρ(σ, σ') = 4`.
    pub affinity_closed_form: Option<f64>,
    /// `2(1 − affinityⁿ)`.
    pub h2_exact: f64,
    /// `4nδ²/m`.
    pub h2_bound: f64,
    pub rho_distance: u32,
    /// Whether `h2_exact ≤ h2_bound`; only asserted when `ρ(σ, σ') = 4`.
    pub bound_holds: bool,
}

/// Affinity and squared Hellinger distance between `P_σ^{⊗n}` and `P_σ'^{⊗n}`.
pub fn hellinger(
    fam: &AdversarialFamily,
    sigma: &SignVector,
    sigma_prime: &SignVector,
    n: u32,
) -> Result<HellingerReport> {
    fam.check_signs(sigma)?;
    fam.check_signs(sigma_prime)?;
    let affinity: f64 = sigma
        .signs()
        .iter()
        .zip(sigma_prime.signs())
        .map(|(&a, &b)| 2.0 * (fam.ball_mass(a) * fam.ball_mass(b)).sqrt())
        .sum();
    let rho = sigma.rho_distance(sigma_prime);
    let m = fam.m as f64;
    let closed = (rho == 4).then(|| 1.0 + (2.0 / m) * ((1.0 - fam.delta * fam.delta).sqrt() - 1.0));
    let h2_exact = 2.0 * (1.0 - affinity.powi(n as i32));
    let h2_bound = 4.0 * f64::from(n) * fam.delta * fam.delta / m;
    Ok(HellingerReport {
        affinity,
        affinity_closed_form: closed,
        h2_exact,
        h2_bound,
        rho_distance: rho,
        bound_holds: rho != 4 || h2_exact <= h2_bound,
    })
}

/// The stages of the reduction of a codebook onto `𝓠`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reduction {
    /// `n_i(Q)`: code points of the input in each region `V_i`.
    pub counts: Vec<usize>,
    /// Number of empty regions.
    pub i0: usize,
    /// Number of regions holding three or more code points.
    pub i_ge3: usize,
    /// `Q₁`: the input with a midpoint added to each empty region.
    pub q1: Codebook,
    /// `Q₂`: recentred, `k₂` points.
    pub q2: Codebook,
    pub k2: usize,
    /// The final member `Q_σ` of `𝓠`.
    pub codebook: Codebook,
    pub sigma: SignVector,
}

/// Maps `c` to a member of `𝓠` whose risk under `P_{σ_p}` is no larger.
///
/// Empty regions receive a midpoint, regions with two or more points are
/// recentred on `{z_i, z_i + w_i}` and single-point regions on `z_i + w_i/2`.
/// The count is then brought back to `k` by splitting single-point regions of
/// largest mass or merging two-point regions of smallest mass, lowest index
/// first among equal masses.
pub fn reduce_quantizer(fam: &AdversarialFamily, c: &Codebook, sigma_p: &SignVector) -> Result<Reduction> {
    fam.check_signs(sigma_p)?;
    if c.dim() != fam.d {
        return Err(Error::DimensionMismatch { expected: fam.d, found: c.dim() });
    }
    if c.k() != fam.k {
        return Err(invalid(format!("codebook has {} points, expected k = {}", c.k(), fam.k)));
    }
    let mut counts = vec![0usize; fam.m];
    for p in c.points() {
        counts[fam.pair_of(p.coords())] += 1;
    }
    let i0 = counts.iter().filter(|&&n| n == 0).count();
    let i_ge3 = counts.iter().filter(|&&n| n >= 3).count();

    let mut q1_rows: Vec<Vec<f64>> = c.points().iter().map(|p| p.coords().to_vec()).collect();
    q1_rows.extend((0..fam.m).filter(|&i| counts[i] == 0).map(|i| fam.midpoint(i)));
    let q1 = Codebook::from_rows(q1_rows)?;

    let mut split: Vec<bool> = counts.iter().map(|&n| n >= 2).collect();
    let q2 = stage_codebook(fam, &split)?;
    let k2 = q2.k();

    let target = fam.m / 2;
    let mut current = split.iter().filter(|&&s| s).count();
    let p = sigma_p.signs();
    if current < target {
        let mut order: Vec<usize> = (0..fam.m).filter(|&i| !split[i]).collect();
        order.sort_by(|&a, &b| p[b].cmp(&p[a]).then(a.cmp(&b)));
        for i in order.into_iter().take(target - current) {
            split[i] = true;
        }
    } else if current > target {
        let mut order: Vec<usize> = (0..fam.m).filter(|&i| split[i]).collect();
        order.sort_by(|&a, &b| p[a].cmp(&p[b]).then(a.cmp(&b)));
        for i in order.into_iter().take(current - target) {
            split[i] = false;
        }
    }
    current = split.iter().filter(|&&s| s).count();
    debug_assert_eq!(current, target);
    let sigma = SignVector::new(split.iter().map(|&s| if s { 1 } else { -1 }).collect())?;
    let codebook = q_sigma(fam, &sigma)?;
    Ok(Reduction { counts, i0, i_ge3, q1, q2, k2, codebook, sigma })
}

fn stage_codebook(fam: &AdversarialFamily, split: &[bool]) -> Result<Codebook> {
    let mut rows = Vec::new();
    for (i, &s) in split.iter().enumerate() {
        if s {
            rows.push(fam.z[i].coords().to_vec());
            rows.push(fam.partner(i));
        } else {
            rows.push(fam.midpoint(i));
        }
    }
    Codebook::from_rows(rows)
}

/// A risk difference `R(a) − R(b)` with its standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskGap {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
}

impl RiskGap {
    /// `value ≤ allowance` up to three standard errors, or to relative
    /// rounding when exact.
    pub fn at_most(&self, allowance: f64, scale: f64) -> bool {
        let slack = if self.exact { 1e-12 * scale } else { 3.0 * self.std_error };
        self.value <= allowance + slack
    }
}

fn risk_gap(a: &Codebook, b: &Codebook, dist: &Distribution, n_mc: usize, seed: u64) -> Result<RiskGap> {
    let ra = true_risk(a, dist, n_mc, seed)?;
    let rb = true_risk(b, dist, n_mc, seed)?;
    if ra.method.is_exact() && rb.method.is_exact() {
        return Ok(RiskGap { value: ra.value - rb.value, std_error: 0.0, exact: true });
    }
    let (value, std_error) = risk_difference_mc(a, b, dist, n_mc, seed)?;
    Ok(RiskGap { value, std_error, exact: false })
}

/// Risks along the reduction `Q → Q₁ → Q₂ → Q_σ` under one `P_{σ_p}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionTrace {
    pub reduction: Reduction,
    pub r_q: RiskEstimate,
    pub r_q1: RiskEstimate,
    pub r_q2: RiskEstimate,
    pub r_sigma: f64,
    /// `R(Q₂) − R(Q₁)`.
    pub recenter_gap: RiskGap,
    /// `i_{≥3}·p₊Δ²/128`.
    pub recenter_allowance: f64,
    /// `R(Q_σ) − R(Q)`.
    pub total_gap: RiskGap,
    pub recenter_holds: bool,
    pub no_increase: bool,
}

/// Runs the reduction on `c` and evaluates every intermediate risk.
pub fn reduction_trace(
    fam: &AdversarialFamily,
    c: &Codebook,
    sigma_p: &SignVector,
    n_mc: usize,
    seed: u64,
) -> Result<ReductionTrace> {
    let reduction = reduce_quantizer(fam, c, sigma_p)?;
    let dist: Distribution = p_sigma(fam, sigma_p)?.into();
    let r_q = true_risk(c, &dist, n_mc, seed)?;
    let r_q1 = true_risk(&reduction.q1, &dist, n_mc, seed)?;
    let r_q2 = true_risk(&reduction.q2, &dist, n_mc, seed)?;
    let r_sigma = closed_risk(fam, &reduction.sigma, sigma_p)?;
    let recenter_gap = risk_gap(&reduction.q2, &reduction.q1, &dist, n_mc, seed)?;
    let d2 = fam.big_delta * fam.big_delta;
    let recenter_allowance = reduction.i_ge3 as f64 * fam.ball_mass(1) * d2 / 128.0;
    let total_gap = risk_gap(&reduction.codebook, c, &dist, n_mc, seed)?;
    let scale = r_q.value.max(r_sigma);
    Ok(ReductionTrace {
        recenter_holds: recenter_gap.at_most(recenter_allowance, scale),
        no_increase: total_gap.at_most(0.0, scale),
        reduction,
        r_q,
        r_q1,
        r_q2,
        r_sigma,
        recenter_gap,
        recenter_allowance,
        total_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionAudit {
    pub trials: usize,
    pub risk_violations: usize,
    pub recenter_violations: usize,
    /// Trials whose input had an empty region or a region with three or more points.
    pub nontrivial: usize,
    /// Largest `(R(Q_σ) − R(Q)) / SE` among Monte Carlo comparisons.
    pub worst_z: f64,
}

/// Codebook of `k` points, each near a random ball centre with probability
/// one half and uniform on `B(0, M)` otherwise.
pub fn random_codebook(fam: &AdversarialFamily, seed: u64) -> Result<Codebook> {
    let mut rng = seed::rng(seed);
    let centers = fam.centers();
    let origin = vec![0.0; fam.d];
    let rows = (0..fam.k)
        .map(|_| {
            if rng.random::<bool>() {
                let c = &centers[rng.random_range(0..centers.len())];
                uniform_in_ball(&mut rng, c.coords(), fam.big_delta)
            } else {
                uniform_in_ball(&mut rng, &origin, fam.radius)
            }
        })
        .collect();
    Codebook::from_rows(rows)
}

/// Reduces `trials` random codebooks under `P_{σ_p}` and counts violations of
/// `R(Q_σ) ≤ R(Q)` and of the recentring bound.
pub fn reduction_audit(
    fam: &AdversarialFamily,
    sigma_p: &SignVector,
    trials: usize,
    n_mc: usize,
    seed: u64,
) -> Result<ReductionAudit> {
    let traces: Vec<ReductionTrace> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let c = random_codebook(fam, derive(seed, 2 * t as u64))?;
            reduction_trace(fam, &c, sigma_p, n_mc, derive(seed, 2 * t as u64 + 1))
        })
        .collect::<Result<_>>()?;
    let mut audit = ReductionAudit { trials, risk_violations: 0, recenter_violations: 0, nontrivial: 0, worst_z: 0.0 };
    for tr in &traces {
        audit.risk_violations += usize::from(!tr.no_increase);
        audit.recenter_violations += usize::from(!tr.recenter_holds);
        audit.nontrivial += usize::from(tr.reduction.i0 + tr.reduction.i_ge3 > 0);
        if !tr.total_gap.exact && tr.total_gap.std_error > 0.0 {
            audit.worst_z = audit.worst_z.max(tr.total_gap.value / tr.total_gap.std_error);
        }
    }
    Ok(audit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoBallCheck {
    pub hypothesis_holds: bool,
    /// Best 2-codebook found by grid search and Lloyd polish.
    pub two_point: Option<Codebook>,
    /// Max-norm distance of `two_point` to the ball centres.
    pub two_point_error: Option<f64>,
    pub one_point: Option<Codebook>,
    /// Distance of `one_point` to the midpoint of the centres.
    pub one_point_error: Option<f64>,
}

/// `ρ ≤ R/2`, `R/2 ≥ 3ρ` and `(R/2 − 3ρ)² ≥ ρ²·2d(d+1)/((d+2)(d+3))`.
pub fn two_ball_hypothesis(r_gap: f64, rho: f64, d: usize) -> bool {
    let half = r_gap / 2.0 - 3.0 * rho;
    rho <= r_gap / 2.0 && half >= 0.0 && half * half >= 2.0 * cone_cell_moment(rho, d)
}

/// Checks the two-ball hypothesis and, when it holds, searches for the
/// optimal 1- and 2-codebooks of two equal-mass cone balls at distance
/// `r_gap` by a grid over the plane of the first two axes followed by Lloyd
/// polish on a large sample symmetrised about the midpoint.
pub fn two_ball_optimality_check(r_gap: f64, rho: f64, d: usize, seed: u64) -> Result<TwoBallCheck> {
    if !(r_gap > 0.0 && rho > 0.0 && r_gap.is_finite() && rho.is_finite()) {
        return Err(invalid("R and ρ must be positive"));
    }
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !two_ball_hypothesis(r_gap, rho, d) {
        return Ok(TwoBallCheck {
            hypothesis_holds: false,
            two_point: None,
            two_point_error: None,
            one_point: None,
            one_point_error: None,
        });
    }
    let z1 = vec![0.0; d];
    let mut z2 = vec![0.0; d];
    z2[0] = r_gap;
    let mid = {
        let mut v = vec![0.0; d];
        v[0] = r_gap / 2.0;
        v
    };
    let radius = r_gap + rho;
    let shift: Vec<Point> =
        [&z1, &z2].iter().map(|z| Point::from_vec(z.iter().zip(&mid).map(|(a, b)| a - b).collect())).collect();
    let dist: Distribution = ConeBallDistribution::new(shift, rho, vec![0.5, 0.5], radius)?.into();
    let to_frame = |c: &Codebook| -> Result<Codebook> {
        Codebook::from_rows(
            c.points().iter().map(|p| p.coords().iter().zip(&mid).map(|(a, b)| a + b).collect()).collect(),
        )
    };
    let coarse = dist.sample(4_000, derive(seed, 0))?;
    let mut fine = dist.sample(100_000, derive(seed, 1))?;
    let mirrored: Vec<Point> = fine.iter().map(|x| Point::from_vec(x.coords().iter().map(|v| -v).collect())).collect();
    fine.extend(mirrored);

    let steps = 21usize;
    let span = r_gap / 2.0 + rho;
    let axis = |i: usize| -span + 2.0 * span * i as f64 / (steps - 1) as f64;
    let grid: Vec<Vec<f64>> = (0..steps)
        .flat_map(|a| {
            (0..if d >= 2 { steps } else { 1 }).map(move |b| {
                let mut v = vec![0.0; d];
                v[0] = axis(a);
                if d >= 2 {
                    v[1] = axis(b) / 2.0;
                }
                v
            })
        })
        .collect();

    let best_of = |cands: Vec<Codebook>| -> Result<Codebook> {
        let scores: Vec<f64> = cands.par_iter().map(|c| empirical_risk(c, &coarse)).collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let mut best: Option<(f64, Codebook)> = None;
        for &i in order.iter().take(5) {
            let run = lloyd(&cands[i], &fine, LloydOptions::default())?;
            if best.as_ref().is_none_or(|(r, _)| run.risk < *r) {
                best = Some((run.risk, run.codebook));
            }
        }
        Ok(best.expect("grid is nonempty").1)
    };

    let mut pairs = Vec::new();
    for a in 0..grid.len() {
        for b in a + 1..grid.len() {
            pairs.push(Codebook::from_rows(vec![grid[a].clone(), grid[b].clone()])?);
        }
    }
    let two = to_frame(&best_of(pairs)?)?;
    let singles = grid.iter().map(|g| Codebook::from_rows(vec![g.clone()])).collect::<Result<Vec<_>>>()?;
    let one = to_frame(&best_of(singles)?)?;

    let centers = Codebook::from_rows(vec![z1, z2])?;
    let two_err = canonical_distance(&two, &centers);
    let one_err = dist_sq(one.point(0), &mid).sqrt();
    Ok(TwoBallCheck {
        hypothesis_holds: true,
        two_point: Some(two),
        two_point_error: Some(two_err),
        one_point: Some(one),
        one_point_error: Some(one_err),
    })
}

/// Minimum over balanced `σ_q ≠ σ_p` of `R(Q_{σ_q}, P_{σ_p}) − R(Q_{σ_p}, P_{σ_p})`,
/// by exhaustive enumeration.
pub fn family_separation(fam: &AdversarialFamily, sigma_p: &SignVector) -> Result<f64> {
    let base = closed_risk(fam, sigma_p, sigma_p)?;
    let mut best = f64::INFINITY;
    for s in balanced_signs(fam.m)? {
        if &s != sigma_p {
            best = best.min(closed_risk(fam, &s, sigma_p)? - base);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimaxOptions {
    /// Largest number of sign patterns per grid point.
    pub pattern_cap: usize,
    /// Monte Carlo budget for risks that have no closed form.
    pub n_mc: usize,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        Self { pattern_cap: PATTERN_CAP, n_mc: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxRow {
    pub n: usize,
    pub sigma_id: String,
    pub rep: usize,
    pub excess_risk: f64,
    pub excess_risk_se: f64,
    pub method: RiskMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxPoint {
    pub n: usize,
    pub delta: f64,
    pub delta_clamped: bool,
    /// Patterns evaluated at this grid point.
    pub patterns: usize,
    pub subsampled: bool,
    /// Largest mean excess risk over patterns.
    pub sup_excess: f64,
    pub sup_excess_se: f64,
    pub sup_sigma_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxTable {
    pub rows: Vec<MinimaxRow>,
    pub points: Vec<MinimaxPoint>,
    /// Log-log fit of the sup excess risk over grid points whose δ was not
    /// clamped; `None` when fewer than two such points are usable.
    pub slope: Option<SlopeFit>,
}

/// For each `n`, builds a family, draws `reps` samples of size `n` from every
/// pattern `P_σ(τ)`, runs `algorithm` on each, and records the excess risk over
/// `Q_σ`. Task `(g, pattern, rep)` uses seed `mix(seed, g, pattern·reps + rep)`.
pub fn minimax_experiment<B, A>(
    builder: B,
    algorithm: A,
    n_grid: &[usize],
    reps: usize,
    options: MinimaxOptions,
    seed: u64,
) -> Result<MinimaxTable>
where
    B: Fn(usize) -> Result<AdversarialFamily>,
    A: Fn(&[Point], usize, u64) -> Result<Codebook> + Sync,
{
    if n_grid.is_empty() {
        return Err(Error::Empty("sample-size grid"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sample-size grid must be strictly increasing"));
    }
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (g, &n) in n_grid.iter().enumerate() {
        let fam = builder(n)?;
        let (patterns, subsampled) = tau_patterns(fam.m, options.pattern_cap, derive(seed, u64::MAX - g as u64))?;
        let tasks: Vec<(usize, usize)> = (0..patterns.len()).flat_map(|s| (0..reps).map(move |r| (s, r))).collect();
        let dists: Vec<(Distribution, f64)> =
            patterns.iter().map(|s| Ok((p_sigma(&fam, s)?.into(), closed_risk(&fam, s, s)?))).collect::<Result<_>>()?;
        let results: Vec<MinimaxRow> = tasks
            .par_iter()
            .map(|&(s, r)| {
                let task = mix(seed, g as u64, (s * reps + r) as u64);
                let (dist, optimum) = &dists[s];
                let sample = dist.sample(n, derive(task, 0))?;
                let c = algorithm(&sample, fam.k, derive(task, 1))?;
                let risk = true_risk(&c, dist, options.n_mc, derive(task, 2))?;
                Ok(MinimaxRow {
                    n,
                    sigma_id: patterns[s].id(),
                    rep: r,
                    excess_risk: risk.value - optimum,
                    excess_risk_se: risk.std_error,
                    method: risk.method,
                })
            })
            .collect::<Result<_>>()?;
        let mut best: Option<(f64, f64, String)> = None;
        for (s, pat) in patterns.iter().enumerate() {
            let vals: Vec<f64> = results[s * reps..(s + 1) * reps].iter().map(|r| r.excess_risk).collect();
            let (mean, se) = mean_se(&vals)?;
            if best.as_ref().is_none_or(|(b, _, _)| mean > *b) {
                best = Some((mean, se, pat.id()));
            }
        }
        let (sup_excess, sup_excess_se, sup_sigma_id) = best.expect("at least one pattern");
        points.push(MinimaxPoint {
            n,
            delta: fam.delta,
            delta_clamped: fam.delta_clamped,
            patterns: patterns.len(),
            subsampled,
            sup_excess,
            sup_excess_se,
            sup_sigma_id,
        });
        rows.extend(results);
    }
    let kept: Vec<&MinimaxPoint> = points.iter().filter(|p| !p.delta_clamped).collect();
    let ns: Vec<f64> = kept.iter().map(|p| p.n as f64).collect();
    let means: Vec<f64> = kept.iter().map(|p| p.sup_excess).collect();
    let ses: Vec<f64> = kept.iter().map(|p| p.sup_excess_se).collect();
    let slope = fit_loglog(&ns, &means, &ses, false).ok();
    Ok(MinimaxTable { rows, points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margin::{margin_check, margin_quantities, CriticalProfile};
    use crate::quantizer::{erm_multistart, optimal_codebooks, true_risk_mc, Effort};
    use proptest::prelude::*;

    fn base_family() -> AdversarialFamily {
        build_family(3, 2, 1.0, 100).unwrap()
    }

    fn s(id: &str) -> SignVector {
        SignVector::parse(id).unwrap()
    }

    #[test]
    fn base_family_parameters() {
        let f = base_family();
        assert_eq!(f.m(), 2);
        assert!((f.big_delta() - 15.0 / (96.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!((f.big_delta() - 0.110485).abs() < 1e-6);
        assert!((f.rho() - 0.0069053).abs() < 1e-7);
        assert!((f.delta() - 2f64.sqrt() / 20.0).abs() < 1e-15);
        assert!(!f.delta_clamped());
        assert_eq!(f.n_target(), Some(100));
    }

    #[test]
    fn family_invariants_hold() {
        for (k, d) in [(3, 2), (6, 2), (9, 3), (12, 1), (6, 5)] {
            let f = build_family(k, d, 1.0, 1000).unwrap();
            assert_eq!(f.z().len(), f.m());
            for i in 0..f.m() {
                assert!((f.w()[i].norm() - f.big_delta()).abs() < 1e-15);
                for j in i + 1..f.m() {
                    let gap = dist_sq(f.z()[i].coords(), f.z()[j].coords()).sqrt();
                    assert!(gap >= 6.0 * f.big_delta() * (1.0 - 1e-12));
                }
            }
            for c in f.centers() {
                assert!(c.norm() + f.rho() <= f.radius() + 1e-12);
            }
            assert_eq!(f.rho(), f.big_delta() / 16.0);
        }
    }

    #[test]
    fn tiny_n_clamps_delta() {
        let f = build_family(3, 2, 1.0, 1).unwrap();
        assert!(f.delta_clamped());
        assert_eq!(f.delta(), 1.0 / 3.0);
    }

    #[test]
    fn invalid_k_is_rejected() {
        assert!(build_family(4, 2, 1.0, 10).is_err());
        assert!(build_family(0, 2, 1.0, 10).is_err());
        assert!(build_family(3, 2, 1.0, 0).is_err());
    }

    #[test]
    fn packing_failure_reports_achieved_count() {
        match AdversarialFamily::with_delta(90, 20, 1.0, 0.1) {
            Err(Error::Packing { needed, achieved }) => {
                assert_eq!(needed, 60);
                assert!(achieved < 60);
            }
            other => panic!("expected packing failure, got {other:?}"),
        }
    }

    #[test]
    fn family_serializes_documented_fields() {
        let v = serde_json::to_value(base_family()).unwrap();
        for key in ["k", "d", "M", "n_target", "Delta", "rho", "delta", "z", "w", "m", "delta_clamped"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn sign_vector_validation() {
        assert!(matches!(SignVector::new(vec![1, 1]), Err(Error::UnbalancedSigns(2))));
        assert!(SignVector::new(vec![1, 0]).is_err());
        assert!(SignVector::new(vec![]).is_err());
        assert_eq!(s("+-+-").rho_distance(&s("-+-+")), 8);
        assert_eq!(s("+-").id(), "+-");
        assert_eq!(SignVector::from_tau(&[1, -1]).unwrap(), s("+--+"));
    }

    #[test]
    fn balanced_enumeration_counts() {
        assert_eq!(balanced_signs(2).unwrap().len(), 2);
        assert_eq!(balanced_signs(6).unwrap().len(), 20);
        assert_eq!(balanced_signs(12).unwrap().len(), 924);
        assert!(balanced_signs(3).is_err());
    }

    #[test]
    fn tau_patterns_cap_and_determinism() {
        let (all, sub) = tau_patterns(4, 64, 0).unwrap();
        assert_eq!(all.len(), 4);
        assert!(!sub);
        let (a, sub) = tau_patterns(16, 64, 9).unwrap();
        assert!(sub);
        assert_eq!(a.len(), 64);
        assert_eq!(a, tau_patterns(16, 64, 9).unwrap().0);
        assert_ne!(a, tau_patterns(16, 64, 10).unwrap().0);
        let (huge, _) = tau_patterns(200, 8, 1).unwrap();
        assert_eq!(huge.len(), 8);
    }

    #[test]
    fn p_sigma_masses_base_family() {
        let f = base_family();
        let p = p_sigma(&f, &s("+-")).unwrap();
        let expect = [0.2677, 0.2677, 0.2323, 0.2323];
        for (m, e) in p.masses().iter().zip(expect) {
            assert!((m - e).abs() < 1e-4, "{m} vs {e}");
        }
        let zero = AdversarialFamily::with_delta(6, 2, 1.0, 0.0).unwrap();
        let p0 = p_sigma(&zero, &s("+-+-")).unwrap();
        assert!(p0.masses().iter().all(|&m| m == 0.125));
        assert_eq!(p0.known_optimum().unwrap().codebooks.len(), 6);
        assert_eq!(p0.known_optimum().unwrap().separation, f64::INFINITY);
    }

    #[test]
    fn q_sigma_base_family() {
        let f = base_family();
        let q = q_sigma(&f, &s("+-")).unwrap();
        assert_eq!(q.k(), 3);
        assert_eq!(q.point(0), f.z()[0].coords());
        assert_eq!(q.point(1), f.partner(0).as_slice());
        assert_eq!(q.point(2), f.midpoint(1).as_slice());
        assert!(q.max_norm() <= f.radius());
    }

    #[test]
    fn closed_risk_base_family_values() {
        let f = base_family();
        let same = closed_risk(&f, &s("+-"), &s("+-")).unwrap();
        assert!((cone_cell_moment(f.rho(), 2) - 1.4305e-5).abs() < 1e-8);
        assert!((same - 1.4323e-3).abs() < 1e-7, "{same}");
        let gap = closed_risk(&f, &s("-+"), &s("+-")).unwrap() - same;
        assert!((gap - f.big_delta().powi(2) * f.delta() / 4.0).abs() < 1e-18);
        assert!((gap - 2.1580e-4).abs() < 1e-7, "{gap}");
    }

    #[test]
    fn closed_risk_matches_per_ball_sum() {
        let f = build_family(6, 2, 1.0, 500).unwrap();
        let all = balanced_signs(f.m()).unwrap();
        for p in &all {
            let dist: Distribution = p_sigma(&f, p).unwrap().into();
            for q in &all {
                let c = q_sigma(&f, q).unwrap();
                let r = true_risk(&c, &dist, 1000, 0).unwrap();
                assert_eq!(r.method, RiskMethod::ClosedForm);
                let cf = closed_risk(&f, q, p).unwrap();
                assert!((r.value - cf).abs() <= 1e-15 * cf.max(1.0) * 10.0, "{} vs {cf}", r.value);
            }
        }
    }

    #[test]
    fn closed_risk_matches_monte_carlo_on_base_family() {
        let f = base_family();
        let dist: Distribution = p_sigma(&f, &s("+-")).unwrap().into();
        let c = q_sigma(&f, &s("+-")).unwrap();
        let mc = true_risk_mc(&c, &dist, 400_000, 3).unwrap();
        let cf = closed_risk(&f, &s("+-"), &s("+-")).unwrap();
        assert!((mc.value - cf).abs() <= 3.0 * mc.std_error, "{} ± {} vs {cf}", mc.value, mc.std_error);
    }

    #[test]
    fn zero_delta_closed_risk_is_flat() {
        let f = AdversarialFamily::with_delta(6, 2, 1.0, 0.0).unwrap();
        let a = closed_risk(&f, &s("++--"), &s("--++")).unwrap();
        let b = closed_risk(&f, &s("--++"), &s("--++")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn q_sigma_is_best_in_class_and_separation_matches() {
        let f = build_family(9, 2, 1.0, 300).unwrap();
        let all = balanced_signs(f.m()).unwrap();
        for p in all.iter().step_by(3) {
            let best = all
                .iter()
                .min_by(|a, b| closed_risk(&f, a, p).unwrap().total_cmp(&closed_risk(&f, b, p).unwrap()))
                .unwrap();
            assert_eq!(best, p);
            let sep = family_separation(&f, p).unwrap();
            assert!((sep - f.epsilon()).abs() <= 1e-15 * f.epsilon().max(1e-300) + 1e-19);
        }
        let min_rho = all
            .iter()
            .flat_map(|a| all.iter().map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| a.rho_distance(b))
            .min()
            .unwrap();
        assert_eq!(min_rho, 4);
    }

    #[test]
    fn hellinger_worked_example() {
        let f = AdversarialFamily::with_delta(3, 2, 1.0, 0.1).unwrap();
        let h = hellinger(&f, &s("+-"), &s("-+"), 1).unwrap();
        assert!((h.affinity - 0.994987).abs() < 1e-6);
        assert!((h.affinity - h.affinity_closed_form.unwrap()).abs() < 1e-14);
        assert!((h.h2_exact - 0.010025).abs() < 1e-6);
        assert!((h.h2_bound - 0.02).abs() < 1e-15);
        assert!(h.bound_holds);
        let same = hellinger(&f, &s("+-"), &s("+-"), 7).unwrap();
        assert!((same.affinity - 1.0).abs() < 1e-15);
        assert!(same.h2_exact.abs() < 1e-14);
    }

    #[test]
    fn margin_parameters_of_base_family() {
        let f = base_family();
        let dist: Distribution = p_sigma(&f, &s("+-")).unwrap().into();
        let opt = optimal_codebooks(&dist, 3, Effort::default(), 0).unwrap();
        let q = margin_quantities(&opt, &dist, 100_000, 1).unwrap();
        assert!((q.b - f.big_delta()).abs() < 1e-9);
        assert!(q.p_min.value >= 1.0 / 6.0 - 3.0 * q.p_min.std_error);
        let profile = CriticalProfile::new(&opt, &dist, 100_000, 2).unwrap();
        for t in [0.0, 0.1, 0.5, 0.9, 1.0].map(|a| a * f.margin_radius()) {
            assert_eq!(profile.p(t).value, 0.0, "t = {t}");
        }
        assert!(profile.p(f.margin_radius() * 1.1).value > 0.0);
        let report = margin_check(&opt, &dist, f.margin_radius(), 16, 100_000, 3).unwrap();
        assert_eq!(report.verdict, crate::margin::Verdict::Holds);
    }

    #[test]
    fn reduction_is_identity_on_q_sigma() {
        let f = build_family(6, 2, 1.0, 200).unwrap();
        for sig in balanced_signs(f.m()).unwrap() {
            let c = q_sigma(&f, &sig).unwrap();
            let r = reduce_quantizer(&f, &c, &s("+-+-")).unwrap();
            assert_eq!(r.sigma, sig);
            assert_eq!(r.codebook, c);
            assert_eq!(r.i0, 0);
            assert_eq!(r.i_ge3, 0);
        }
    }

    #[test]
    fn reduction_recovers_jittered_q_sigma() {
        let f = base_family();
        let sig = s("-+");
        let mut rng = seed::rng(5);
        let q = q_sigma(&f, &sig).unwrap();
        let rows = q.points().iter().map(|p| uniform_in_ball(&mut rng, p.coords(), 1e-3)).collect();
        let c = Codebook::from_rows(rows).unwrap();
        let tr = reduction_trace(&f, &c, &s("+-"), 200_000, 6).unwrap();
        assert_eq!(tr.reduction.sigma, sig);
        assert!(tr.no_increase && tr.recenter_holds);
    }

    #[test]
    fn reduction_handles_crowded_and_empty_regions() {
        let f = base_family();
        let z0 = f.z()[0].coords();
        let c = Codebook::from_rows(vec![z0.to_vec(), f.partner(0), f.midpoint(0)]).unwrap();
        let tr = reduction_trace(&f, &c, &s("-+"), 200_000, 1).unwrap();
        assert_eq!(tr.reduction.counts, vec![3, 0]);
        assert_eq!((tr.reduction.i0, tr.reduction.i_ge3), (1, 1));
        assert_eq!(tr.reduction.q1.k(), 4);
        assert_eq!(tr.reduction.k2, 3);
        assert!(tr.no_increase, "{:?}", tr.total_gap);
        assert!(tr.recenter_holds);
    }

    #[test]
    fn small_reduction_audit_is_clean() {
        let f = base_family();
        let a = reduction_audit(&f, &s("+-"), 40, 50_000, 11).unwrap();
        assert_eq!(a.risk_violations, 0, "{a:?}");
        assert_eq!(a.recenter_violations, 0, "{a:?}");
        assert!(a.nontrivial > 0);
    }

    #[test]
    fn two_ball_check_finds_centres_and_midpoint() {
        let c = two_ball_optimality_check(1.0, 0.01, 2, 0).unwrap();
        assert!(c.hypothesis_holds);
        assert!(c.two_point_error.unwrap() < 1e-3, "{:?}", c);
        assert!(c.one_point_error.unwrap() < 1e-3, "{:?}", c.one_point_error);
    }

    #[test]
    fn two_ball_hypothesis_gate() {
        let c = two_ball_optimality_check(1.0, 0.2, 2, 0).unwrap();
        assert!(!c.hypothesis_holds);
        assert!(c.two_point.is_none());
        assert!(two_ball_hypothesis(1.0, 0.01, 2));
    }

    #[test]
    fn minimax_experiment_shapes_and_clamp_exclusion() {
        let algo = |x: &[Point], k: usize, seed: u64| Ok(erm_multistart(x, k, 4, seed)?.codebook);
        let opts = MinimaxOptions { pattern_cap: 64, n_mc: 10_000 };
        let t = minimax_experiment(|n| build_family(3, 2, 1.0, n), algo, &[4, 64, 256], 3, opts, 1).unwrap();
        assert_eq!(t.rows.len(), 3 * 2 * 3);
        assert!(t.points[0].delta_clamped);
        assert!(!t.points[1].delta_clamped);
        assert_eq!(t.slope.as_ref().map(|s| s.points_used), Some(2));
        let again = minimax_experiment(|n| build_family(3, 2, 1.0, n), algo, &[4, 64, 256], 3, opts, 1).unwrap();
        assert_eq!(t, again);
        assert!(minimax_experiment(|n| build_family(3, 2, 1.0, n), algo, &[64, 64], 3, opts, 1).is_err());
    }

    fn balanced(m: usize) -> impl Strategy<Value = SignVector> {
        Just((0..m).map(|i| if i < m / 2 { 1i8 } else { -1 }).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| SignVector::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn masses_sum_to_one(sig in (1usize..6).prop_flat_map(|h| balanced(2 * h)), delta in 0.0f64..=1.0 / 3.0) {
            let f = AdversarialFamily::with_delta(3 * sig.len() / 2, 2, 1.0, delta).unwrap();
            let p = p_sigma(&f, &sig).unwrap();
            prop_assert!((p.masses().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            prop_assert_eq!(q_sigma(&f, &sig).unwrap().k(), f.k());
        }

        #[test]
        fn risk_gap_identity(
            pair in (1usize..6).prop_flat_map(|h| (balanced(2 * h), balanced(2 * h))),
            delta in 0.0f64..=1.0 / 3.0,
        ) {
            let (a, b) = pair;
            let f = AdversarialFamily::with_delta(3 * a.len() / 2, 3, 2.0, delta).unwrap();
            let gap = closed_risk(&f, &a, &b).unwrap() - closed_risk(&f, &b, &b).unwrap();
            let expect = f.big_delta().powi(2) * delta / (8.0 * f.m() as f64) * f64::from(a.rho_distance(&b));
            prop_assert!((gap - expect).abs() <= 1e-15);
        }

        #[test]
        fn hellinger_product_rule(pair in (1usize..5).prop_flat_map(|h| (balanced(2 * h), balanced(2 * h))), delta in 0.0f64..=1.0 / 3.0) {
            let (a, b) = pair;
            let f = AdversarialFamily::with_delta(3 * a.len() / 2, 2, 1.0, delta).unwrap();
            let one = hellinger(&f, &a, &b, 1).unwrap();
            for n in [1u32, 2, 5, 10] {
                let h = hellinger(&f, &a, &b, n).unwrap();
                prop_assert!((h.h2_exact - 2.0 * (1.0 - one.affinity.powi(n as i32))).abs() < 1e-15);
                prop_assert!(h.bound_holds);
                if let Some(cf) = h.affinity_closed_form {
                    prop_assert!((cf - h.affinity).abs() < 1e-14);
                }
            }
        }

        #[test]
        fn reduction_outputs_member_of_q(seed in any::<u64>()) {
            let f = build_family(6, 2, 1.0, 300).unwrap();
            let c = random_codebook(&f, seed).unwrap();
            let r = reduce_quantizer(&f, &c, &SignVector::parse("+-+-").unwrap()).unwrap();
            prop_assert_eq!(r.codebook.k(), 6);
            prop_assert_eq!(&r.codebook, &q_sigma(&f, &r.sigma).unwrap());
            prop_assert_eq!(r.counts.iter().sum::<usize>(), 6);
        }
    }
}
