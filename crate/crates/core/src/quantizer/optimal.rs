use serde::Serialize;

use super::erm::{multistart_all, partition_count, InitStrategy, PARTITION_GUARD};
use super::{
    ball_respecting_assignment, canonical_distance, erm_exhaustive_weighted, lloyd_weighted, risk_difference_mc,
    true_risk, weighted_risk, CodebookSet, LloydOptions, RiskEstimate, RiskMethod, SetMethod, CANONICAL_TOL,
};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::geometry::Codebook;
use crate::seed::derive;

/// Search budget for optimal-codebook discovery on distributions without a
/// closed-form answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Effort {
    pub restarts: usize,
    /// Size of the training sample the Lloyd chains run on.
    pub sample_size: usize,
    /// Monte Carlo budget for comparing candidate risks.
    pub n_mc: usize,
}

impl Default for Effort {
    fn default() -> Self {
        Self { restarts: 20, sample_size: 200_000, n_mc: 200_000 }
    }
}

/// Optimal codebooks of `dist` for `k` points.
///
/// Closed-form optima are returned with method `analytic`, small finite
/// supports are solved by partition enumeration (`exhaustive`), and anything
/// else by multistart Lloyd with deduplication (`approximate`). In the last
/// case every distinct chain output whose risk is within three paired standard
/// errors of the best one is kept.
pub fn optimal_codebooks(dist: &Distribution, k: usize, effort: Effort, seed: u64) -> Result<CodebookSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if let Some(opt) = dist.known_optimum(k) {
        let mut set = CodebookSet::new(SetMethod::Analytic);
        for c in &opt.codebooks {
            set.insert(c.clone(), true_risk(c, dist, effort.n_mc, seed)?);
        }
        set.distinct_near_optimal = set.len();
        return Ok(set);
    }
    match dist {
        Distribution::FiniteSupport(f) if partition_count(f.atoms().len(), k) <= PARTITION_GUARD => {
            let (_, optima) = erm_exhaustive_weighted(f.atoms(), f.weights(), k)?;
            let mut set = CodebookSet::new(SetMethod::Exhaustive);
            for c in optima {
                let r = weighted_risk(&c, f.atoms(), f.weights())?;
                set.insert(c, RiskEstimate::exact(r, RiskMethod::ExactFinite, f.atoms().len()));
            }
            set.distinct_near_optimal = set.len();
            Ok(set)
        }
        Distribution::FiniteSupport(f) => {
            if k > f.atoms().len() {
                return Err(Error::InvalidParameter(format!("k = {k} exceeds the number of atoms")));
            }
            let init = InitStrategy::Random { restarts: effort.restarts.max(1) };
            let (best, runs) =
                multistart_all(f.atoms(), Some(f.weights()), k, init, derive(seed, 1), LloydOptions::default())?;
            let mut set = CodebookSet::new(SetMethod::Approximate);
            for run in runs.iter().filter(|r| r.risk <= best.risk * (1.0 + 1e-10)) {
                set.insert(
                    run.codebook.clone(),
                    RiskEstimate::exact(run.risk, RiskMethod::ExactFinite, f.atoms().len()),
                );
            }
            set.distinct_near_optimal = set.len();
            set.budget = Some(runs.len());
            Ok(set)
        }
        _ => approximate(dist, k, effort, seed),
    }
}

fn approximate(dist: &Distribution, k: usize, effort: Effort, seed: u64) -> Result<CodebookSet> {
    let sample = dist.sample(effort.sample_size, derive(seed, 0))?;
    let init = InitStrategy::Random { restarts: effort.restarts.max(1) };
    let (_, runs) = multistart_all(&sample, None, k, init, derive(seed, 1), LloydOptions::default())?;
    let mut candidates: Vec<Codebook> = Vec::new();
    for run in runs.iter() {
        let c = polish(dist, &run.codebook);
        if !candidates.iter().any(|e| canonical_distance(e, &c) <= CANONICAL_TOL) {
            candidates.push(c);
        }
    }
    let eval_seed = derive(seed, 2);
    let risks: Vec<RiskEstimate> =
        candidates.iter().map(|c| true_risk(c, dist, effort.n_mc, eval_seed)).collect::<Result<_>>()?;
    let best = (0..risks.len()).min_by(|&a, &b| risks[a].value.total_cmp(&risks[b].value)).expect("restarts ≥ 1");
    let mut set = CodebookSet::new(SetMethod::Approximate);
    set.insert(candidates[best].clone(), risks[best]);
    for (i, c) in candidates.iter().enumerate() {
        if i == best {
            continue;
        }
        let near = if risks[i].method.is_exact() && risks[best].method.is_exact() {
            risks[i].value <= risks[best].value * (1.0 + 1e-10)
        } else {
            let (diff, se) = risk_difference_mc(c, &candidates[best], dist, effort.n_mc, eval_seed)?;
            diff <= 3.0 * se
        };
        if near {
            set.insert(c.clone(), risks[i]);
        }
    }
    set.distinct_near_optimal = set.len();
    set.budget = Some(runs.len());
    set.distinct_candidates = Some(candidates.len());
    Ok(set)
}

/// For cone-ball mixtures, replaces a sample-based codebook by the population
/// Lloyd fixed point when that fixed point keeps every ball inside one cell.
fn polish(dist: &Distribution, c: &Codebook) -> Codebook {
    let Distribution::ConeBall(cb) = dist else { return c.clone() };
    let Ok(run) = lloyd_weighted(c, cb.centers(), cb.masses(), LloydOptions::default()) else { return c.clone() };
    if !run.codebook.has_duplicates() && ball_respecting_assignment(&run.codebook, cb).is_some() {
        run.codebook
    } else {
        c.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{FiniteSupport, UniformBall};
    use crate::geometry::Point;
    use crate::quantizer::canonical;

    #[test]
    fn finite_support_of_k_atoms_returns_atoms() {
        let atoms = vec![Point::from([0.0, 1.0]), Point::from([2.0, 0.0]), Point::from([-1.0, -1.0])];
        let d: Distribution = FiniteSupport::new(atoms.clone(), vec![0.2, 0.3, 0.5], None).unwrap().into();
        let set = optimal_codebooks(&d, 3, Effort::default(), 0).unwrap();
        assert_eq!(set.method(), SetMethod::Exhaustive);
        assert_eq!(set.len(), 1);
        assert_eq!(set.codebooks()[0], canonical(&Codebook::new(atoms).unwrap()));
        assert_eq!(set.risks()[0].value, 0.0);
    }

    #[test]
    fn symmetric_finite_support_keeps_tied_optima() {
        // Four corners of a square, k = 2: two mirror-image optimal pairings.
        let atoms: Vec<Point> =
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]].iter().map(|&p| Point::from(p)).collect();
        let d: Distribution = FiniteSupport::new(atoms, vec![0.25; 4], None).unwrap().into();
        let set = optimal_codebooks(&d, 2, Effort::default(), 0).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.risks().iter().all(|r| (r.value - 0.25).abs() < 1e-15));
    }

    #[test]
    fn uniform_ball_reports_many_near_optima() {
        let d: Distribution = UniformBall::new(1.0, 2).unwrap().into();
        let effort = Effort { restarts: 12, sample_size: 50_000, n_mc: 50_000 };
        let set = optimal_codebooks(&d, 2, effort, 4).unwrap();
        assert_eq!(set.method(), SetMethod::Approximate);
        assert!(set.distinct_near_optimal >= 6, "{}", set.distinct_near_optimal);
    }
}
