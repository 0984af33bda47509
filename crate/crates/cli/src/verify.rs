//! Property-verification suites. Each suite runs under `catch_unwind`, so a
//! panic inside the library is reported as a failed suite rather than
//! aborting the run.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::Rng as _;
use serde::Serialize;
use vqmargin_core::distributions::{build_quasi_gaussian, cone_cell_moment, cone_radial_cdf};
use vqmargin_core::geometry::{bisector_distance, contrast, critical_distance, dist_sq, nearest_index};
use vqmargin_core::margin::{
    cell_masses, critical_area_bound, critical_area_mc, gaussian_condition, gaussian_pmin_lower, gaussian_risk_bound,
    kappa0, key_inequality_audit, key_inequality_probe, voronoi_audit,
};
use vqmargin_core::minimax::{
    balanced_signs, build_family, closed_risk, hellinger, p_sigma, q_sigma, reduce_quantizer, reduction_audit,
    reduction_trace, AdversarialFamily,
};
use vqmargin_core::quantizer::{
    erm_exhaustive, erm_multistart_with, optimal_codebooks, risk_difference_mc, true_risk, true_risk_mc, Effort,
    InitStrategy, LloydOptions,
};
use vqmargin_core::seed::{self, derive};
use vqmargin_core::{
    Codebook, ConeBallDistribution, Distribution, FiniteSupport, Point, SignVector, UniformBall, Verdict,
};

use crate::config::MarginSpec;
use crate::margin_report::{margin_report, RadiusSource};
use crate::report::{ensure_dir, write_json, SCHEMA_VERSION};

pub const REPORT_FILE: &str = "verify_report.json";

/// Suite names in execution order.
pub const SUITES: &[&str] =
    &["geometry", "voronoi", "cone", "hellinger", "risk-gap", "reduction", "erm-oracle", "kappa", "margin", "gaussian"];

pub const CONE_MC: usize = 1_000_000;
pub const RISK_GAP_MC: usize = 1_000_000;
pub const VORONOI_TRIPLES: usize = 100_000;
pub const ERM_INSTANCES: usize = 100;
pub const ERM_MIN_MATCHES: usize = 95;
pub const KEY_TRIALS: usize = 1_000;
pub const KEY_MC: usize = 100_000;
pub const REDUCTION_TRIALS: usize = 200;
pub const REDUCTION_MC: usize = 100_000;
pub const GAUSSIAN_MC: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.to_owned(), passed, detail: detail.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub master_seed: u64,
    pub fault: Option<String>,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

/// The adversarial family with `k = 3`, `d = 2`, `M = 1`, `n = 100`.
pub fn base_family() -> Result<(AdversarialFamily, SignVector)> {
    Ok((build_family(3, 2, 1.0, 100)?, SignVector::parse("+-")?))
}

/// Three atoms in the plane with unequal weights.
pub fn three_atoms() -> Result<Distribution> {
    let atoms = vec![Point::from([0.0, 0.0]), Point::from([1.0, 0.0]), Point::from([0.0, 1.0])];
    Ok(FiniteSupport::new(atoms, vec![0.2, 0.3, 0.5], None)?.into())
}

/// A polarized truncated Gaussian mixture in the unit disk: three means on the
/// circle of radius 1/2, `σ = 0.008`, weights `(0.3, 0.3, 0.4)`.
pub fn polarized_mixture() -> Result<Distribution> {
    let means = [90.0f64, 210.0, 330.0]
        .iter()
        .map(|a| {
            let t = a.to_radians();
            Point::from([0.5 * t.cos(), 0.5 * t.sin()])
        })
        .collect();
    Ok(build_quasi_gaussian(means, 0.008, vec![0.3, 0.3, 0.4], 1.0)?.into())
}

fn suite_seed(master: u64, name: &str) -> u64 {
    let idx = SUITES.iter().position(|s| *s == name).unwrap_or(SUITES.len());
    derive(master, idx as u64)
}

/// Runs one suite, converting errors and panics into a failed result.
pub fn run_suite(name: &str, master_seed: u64) -> SuiteResult {
    let seed = suite_seed(master_seed, name);
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| dispatch(name, seed)));
    let result = match outcome {
        Ok(Ok(checks)) => {
            SuiteResult { name: name.to_owned(), passed: checks.iter().all(|c| c.passed), checks, error: None }
        }
        Ok(Err(e)) => {
            SuiteResult { name: name.to_owned(), passed: false, checks: Vec::new(), error: Some(format!("{e:#}")) }
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            SuiteResult {
                name: name.to_owned(),
                passed: false,
                checks: Vec::new(),
                error: Some(format!("panic: {msg}")),
            }
        }
    };
    tracing::info!(suite = name, passed = result.passed, secs = start.elapsed().as_secs_f64(), "suite finished");
    result
}

fn dispatch(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "geometry" => geometry_suite(seed),
        "voronoi" => voronoi_suite(seed),
        "cone" => cone_suite(seed),
        "hellinger" => hellinger_suite(),
        "risk-gap" => risk_gap_suite(seed),
        "reduction" => reduction_suite(seed),
        "erm-oracle" => erm_oracle_suite(seed),
        "kappa" => kappa_suite(seed),
        "margin" => margin_suite(seed),
        "gaussian" => gaussian_suite(seed),
        other => bail!("unknown suite `{other}`; available: {}", SUITES.join(", ")),
    }
}

/// Runs the selected suites (all when `filter` is empty).
pub fn run_verify(filter: &[String], master_seed: u64, fault: Option<String>) -> Result<VerifyReport> {
    for f in filter {
        if !SUITES.contains(&f.as_str()) {
            bail!("unknown suite `{f}`; available: {}", SUITES.join(", "));
        }
    }
    let suites: Vec<SuiteResult> = SUITES
        .iter()
        .filter(|s| filter.is_empty() || filter.iter().any(|f| f == *s))
        .map(|s| run_suite(s, master_seed))
        .collect();
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        command: "verify",
        master_seed,
        fault,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

pub fn write_verify(report: &VerifyReport, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join(REPORT_FILE), report)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

pub fn geometry_suite(seed: u64) -> Result<Vec<Check>> {
    let mut rng = seed::rng(seed);
    let trials = 20_000;
    let (mut nearest_bad, mut contrast_bad, mut bisector_bad, mut critical_bad) = (0, 0, 0, 0);
    for _ in 0..trials {
        let k = rng.random_range(2..=6);
        let d = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let c = Codebook::from_rows(rows.clone())?;
        let x = Point::new((0..d).map(|_| rng.random_range(-1.5..1.5)).collect())?;
        let dists: Vec<f64> = rows.iter().map(|r| dist_sq(r, x.coords())).collect();
        let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let own = dists.iter().position(|&v| v == best).expect("nonempty");
        let a = nearest_index(&c, &x)?;
        nearest_bad += usize::from(a.index != own || a.distance_sq != best);
        contrast_bad += usize::from(contrast(&c, &x)? != best);
        let (i, j) = (own, (own + 1) % k);
        let sep = dist_sq(&rows[i], &rows[j]).sqrt();
        let expect = (dists[i] - dists[j]).abs() / (2.0 * sep);
        bisector_bad += usize::from((bisector_distance(&c, i, j, &x)? - expect).abs() > 1e-12);
        let crit = (0..k)
            .filter(|&l| l != own)
            .map(|l| (dists[l] - best) / (2.0 * dist_sq(&rows[own], &rows[l]).sqrt()))
            .fold(f64::INFINITY, f64::min);
        critical_bad += usize::from((critical_distance(std::slice::from_ref(&c), &x)? - crit).abs() > 1e-12);
    }
    Ok(vec![
        check(
            "nearest index is the first minimiser",
            nearest_bad == 0,
            format!("{nearest_bad} of {trials} mismatches"),
        ),
        check(
            "contrast is the minimal squared distance",
            contrast_bad == 0,
            format!("{contrast_bad} of {trials} mismatches"),
        ),
        check("bisector distance formula", bisector_bad == 0, format!("{bisector_bad} of {trials} mismatches")),
        check(
            "critical distance over own-cell bisectors",
            critical_bad == 0,
            format!("{critical_bad} of {trials} mismatches"),
        ),
    ])
}

pub fn voronoi_suite(seed: u64) -> Result<Vec<Check>> {
    let a = voronoi_audit(VORONOI_TRIPLES, 3, 2, 1.0, 1e-9, seed)?;
    Ok(vec![
        check(
            "first boundary inequality",
            a.vor1_violations == 0,
            format!("{} violations in {} triples, worst ratio {:.6e}", a.vor1_violations, a.trials, a.vor1_worst),
        ),
        check(
            "second boundary inequality",
            a.vor2_violations == 0,
            format!("{} violations in {} triples, worst ratio {:.6e}", a.vor2_violations, a.trials, a.vor2_worst),
        ),
    ])
}

/// `∫₀^ρ r^{d+1}(ρ − r) dr / ∫₀^ρ r^{d−1}(ρ − r) dr` by composite Simpson.
pub fn cone_moment_quadrature(rho: f64, d: usize, intervals: usize) -> f64 {
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let h = rho / intervals as f64;
        let mut s = f(0.0) + f(rho);
        for i in 1..intervals {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let num = simpson(&|r| r.powi(d as i32 + 1) * (rho - r));
    let den = simpson(&|r| r.powi(d as i32 - 1) * (rho - r));
    num / den
}

pub fn cone_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let closed = cone_cell_moment(0.1, 2);
    checks.push(check("closed form at rho = 0.1, d = 2", (closed - 0.003).abs() < 1e-15, format!("{closed:.17e}")));
    for d in [1usize, 2, 3, 5] {
        let q = cone_moment_quadrature(0.1, d, 2_000);
        let c = cone_cell_moment(0.1, d);
        checks.push(check(
            &format!("radial quadrature, d = {d}"),
            (q - c).abs() <= 1e-10,
            format!("quadrature {q:.15e}, closed {c:.15e}"),
        ));
    }
    let s = 0.37;
    let cdf = cone_radial_cdf(s * 0.1, 0.1, 2);
    checks.push(check(
        "radial CDF, d = 2",
        (cdf - (3.0 * s * s - 2.0 * s.powi(3))).abs() < 1e-15,
        format!("{cdf:.15e}"),
    ));
    let center = [0.2, -0.1];
    let dist: Distribution = ConeBallDistribution::new(vec![Point::from(center)], 0.1, vec![1.0], 1.0)?.into();
    let one = Codebook::from_rows(vec![center.to_vec()])?;
    let mc = true_risk_mc(&one, &dist, CONE_MC, seed)?;
    let rel = (mc.value - closed).abs() / closed;
    checks.push(check(
        "Monte Carlo second moment within 0.5%",
        rel < 5e-3,
        format!("MC {:.6e} ± {:.2e}, relative error {rel:.3e}", mc.value, mc.std_error),
    ));
    Ok(checks)
}

pub fn hellinger_suite() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let worked = AdversarialFamily::with_delta(3, 2, 1.0, 0.1)?;
    let h = hellinger(&worked, &SignVector::parse("+-")?, &SignVector::parse("-+")?, 1)?;
    checks.push(check(
        "worked example m = 2, delta = 0.1",
        (h.affinity - 0.994_987).abs() < 1e-6
            && (h.h2_exact - 0.010_025).abs() < 1e-6
            && (h.h2_bound - 0.02).abs() < 1e-15,
        format!("affinity {:.9}, H2 {:.9}, bound {}", h.affinity, h.h2_exact, h.h2_bound),
    ));
    let (f0, _) = base_family()?;
    let families =
        [f0, AdversarialFamily::with_delta(6, 2, 1.0, 0.2)?, AdversarialFamily::with_delta(9, 3, 1.0, 1.0 / 3.0)?];
    let (mut pairs, mut affinity_bad, mut bound_bad, mut product_bad) = (0, 0, 0, 0);
    let mut worst = 0.0f64;
    for fam in &families {
        let all = balanced_signs(fam.m())?;
        for a in &all {
            for b in &all {
                let one = hellinger(fam, a, b, 1)?;
                for n in [1u32, 2, 5, 10] {
                    let h = hellinger(fam, a, b, n)?;
                    product_bad += usize::from((h.h2_exact - 2.0 * (1.0 - one.affinity.powi(n as i32))).abs() > 1e-15);
                    if a.rho_distance(b) == 4 {
                        bound_bad += usize::from(h.h2_exact > h.h2_bound);
                    }
                }
                if let Some(cf) = one.affinity_closed_form {
                    pairs += 1;
                    worst = worst.max((cf - one.affinity).abs());
                    affinity_bad += usize::from((cf - one.affinity).abs() > 1e-14);
                }
            }
        }
    }
    checks.push(check(
        "combinatorial affinity equals the closed form",
        affinity_bad == 0,
        format!("{pairs} pairs at distance 4, worst gap {worst:.3e}"),
    ));
    checks.push(check(
        "squared Hellinger distance below 4n delta^2 / m",
        bound_bad == 0,
        format!("{bound_bad} violations"),
    ));
    checks.push(check("product rule 2(1 - affinity^n)", product_bad == 0, format!("{product_bad} mismatches")));
    Ok(checks)
}

pub fn risk_gap_suite(seed: u64) -> Result<Vec<Check>> {
    let (fam, _) = base_family()?;
    let all = balanced_signs(fam.m())?;
    let mut checks = Vec::new();
    for (pi, p) in all.iter().enumerate() {
        let dist: Distribution = p_sigma(&fam, p)?.into();
        let qp = q_sigma(&fam, p)?;
        for (qi, q) in all.iter().enumerate() {
            let cq = q_sigma(&fam, q)?;
            let closed = closed_risk(&fam, q, p)? - closed_risk(&fam, p, p)?;
            let exact = true_risk(&cq, &dist, 1_000, 0)?.value - true_risk(&qp, &dist, 1_000, 0)?.value;
            let (mc, se) =
                risk_difference_mc(&cq, &qp, &dist, RISK_GAP_MC, derive(seed, (pi * all.len() + qi) as u64))?;
            let z = if se > 0.0 {
                (mc - closed).abs() / se
            } else if mc == closed {
                0.0
            } else {
                f64::INFINITY
            };
            checks.push(check(
                &format!("gap Q[{q}] vs Q[{p}] under P[{p}]"),
                (mc - closed).abs() <= 3.0 * se && (exact - closed).abs() <= 1e-15,
                format!("closed {closed:.6e}, cell sum {exact:.6e}, MC {mc:.6e} ± {se:.2e} (|z| = {z:.2})"),
            ));
        }
    }
    Ok(checks)
}

pub fn reduction_suite(seed: u64) -> Result<Vec<Check>> {
    let (fam, sigma) = base_family()?;
    let mut checks = Vec::new();
    let mut fixed_bad = 0;
    for s in balanced_signs(fam.m())? {
        let c = q_sigma(&fam, &s)?;
        let r = reduce_quantizer(&fam, &c, &sigma)?;
        fixed_bad += usize::from(r.codebook != c || r.sigma != s);
    }
    checks.push(check("members of the class are fixed points", fixed_bad == 0, format!("{fixed_bad} moved")));
    let mut rng = seed::rng(derive(seed, 0));
    let mut jitter_bad = 0;
    for s in balanced_signs(fam.m())? {
        let q = q_sigma(&fam, &s)?;
        let rows =
            q.points().iter().map(|p| p.coords().iter().map(|v| v + rng.random_range(-1e-3..1e-3)).collect()).collect();
        let tr = reduction_trace(&fam, &Codebook::from_rows(rows)?, &sigma, REDUCTION_MC, derive(seed, 1))?;
        jitter_bad += usize::from(tr.reduction.sigma != s || !tr.no_increase);
    }
    checks.push(check(
        "jittered class members reduce back without risk increase",
        jitter_bad == 0,
        format!("{jitter_bad} failures"),
    ));
    let a = reduction_audit(&fam, &sigma, REDUCTION_TRIALS, REDUCTION_MC, derive(seed, 2))?;
    checks.push(check(
        "no risk increase beyond 3 SE",
        a.risk_violations == 0,
        format!(
            "{} violations in {} codebooks ({} with empty or crowded regions)",
            a.risk_violations, a.trials, a.nontrivial
        ),
    ));
    checks.push(check("recentring bound", a.recenter_violations == 0, format!("{} violations", a.recenter_violations)));
    Ok(checks)
}

/// ERM oracle comparison on `instances` tiny samples. Returns
/// `(matches, beats, instances)`.
pub fn erm_oracle(instances: usize, seed: u64) -> Result<(usize, usize, usize)> {
    let (mut matches, mut beats) = (0, 0);
    for t in 0..instances {
        let mut rng = seed::rng(derive(seed, t as u64));
        let n = rng.random_range(3..=8);
        let k = rng.random_range(1..=3usize).min(n);
        let d = rng.random_range(1..=2);
        let sample: Vec<Point> = (0..n)
            .map(|_| Point::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect::<Result<_, _>>()?;
        let ex = erm_exhaustive(&sample, k)?;
        let ms = erm_multistart_with(
            &sample,
            k,
            InitStrategy::AllSubsets,
            derive(seed, u64::MAX - t as u64),
            LloydOptions::default(),
        )?;
        matches += usize::from((ms.risk - ex.risk).abs() <= 1e-9);
        beats += usize::from(ms.risk < ex.risk - 1e-9);
    }
    Ok((matches, beats, instances))
}

pub fn erm_oracle_suite(seed: u64) -> Result<Vec<Check>> {
    let (matches, beats, n) = erm_oracle(ERM_INSTANCES, seed)?;
    Ok(vec![
        check("multistart matches enumeration", matches >= ERM_MIN_MATCHES, format!("{matches} of {n} within 1e-9")),
        check(
            "multistart never beats enumeration",
            beats == 0,
            format!("{beats} instances below the enumerated minimum"),
        ),
    ])
}

/// `κ₀` of a member of the adversarial family from its analytic `B`, `p_min`,
/// `r₀` and `ε`.
pub fn analytic_kappa0(fam: &AdversarialFamily) -> Result<f64> {
    let b = fam.big_delta();
    let p_min = fam.ball_mass(1).min(2.0 * fam.ball_mass(-1));
    Ok(kappa0(fam.k(), fam.radius(), fam.epsilon(), p_min, b, fam.margin_radius())?)
}

pub fn kappa_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let ex = kappa0(2, 1.0, 0.1, 0.5, 1.0, 0.5)?;
    checks.push(check("formula example", ex == 4096.0, format!("{ex}")));
    let (fam, sigma) = base_family()?;
    let dist: Distribution = p_sigma(&fam, &sigma)?.into();
    let optimal = optimal_codebooks(&dist, fam.k(), Effort::default(), derive(seed, 0))?;
    let k0 = analytic_kappa0(&fam)?;
    let audit = key_inequality_audit(&dist, &optimal, k0, KEY_TRIALS, KEY_MC, derive(seed, 1))?;
    checks.push(check(
        "key inequality with the analytic constant",
        audit.violations == 0,
        format!(
            "{} violations in {} codebooks, kappa0 {k0:.6e}, worst ratio {:.6e}",
            audit.violations, audit.trials, audit.worst_ratio
        ),
    ));
    if let Some(worst) = audit.worst_codebook.clone() {
        let probe = key_inequality_probe(&dist, &optimal, audit.worst_ratio / 2.0, &[worst], KEY_MC, derive(seed, 2))?;
        checks.push(check(
            "a constant below the worst observed ratio is violated",
            probe.violations == 1,
            format!("kappa {:.6e}", audit.worst_ratio / 2.0),
        ));
    }
    Ok(checks)
}

pub fn margin_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let spec = MarginSpec::default();

    let atoms = three_atoms()?;
    let r = margin_report(&atoms, "finite_support", 3, spec, Effort::default(), 200_000, derive(seed, 0))?;
    checks.push(check(
        "three-atom support holds at half the minimum gap",
        r.verdict == Verdict::Holds
            && r.r0_source == RadiusSource::Certified
            && rel_close(r.report.r0_tested, 0.5, 1e-6),
        format!("verdict {}, r0 {:.9}", r.verdict.as_str(), r.report.r0_tested),
    ));

    let (fam, sigma) = base_family()?;
    let dist: Distribution = p_sigma(&fam, &sigma)?.into();
    let r = margin_report(&dist, "adversarial", fam.k(), spec, Effort::default(), 200_000, derive(seed, 1))?;
    let pm = r.report.p_min;
    checks.push(check(
        "adversarial family holds with B = Delta and r0 = 7 Delta / 16",
        r.verdict == Verdict::Holds
            && (r.report.b - fam.big_delta()).abs() < 1e-9
            && rel_close(r.report.r0_tested, 7.0 * fam.big_delta() / 16.0, 1e-12)
            && pm.value >= 1.0 / (2.0 * fam.k() as f64) - 3.0 * pm.std_error,
        format!(
            "verdict {}, B {:.9}, r0 {:.9}, p_min {:.6} ± {:.2e}",
            r.verdict.as_str(),
            r.report.b,
            r.report.r0_tested,
            pm.value,
            pm.std_error
        ),
    ));
    checks.push(check(
        "adversarial family separation and finite kappa0",
        r.report.epsilon.is_some_and(|e| rel_close(e, fam.epsilon(), 1e-12))
            && r.report.kappa0.is_some_and(f64::is_finite),
        format!("epsilon {:?}, kappa0 {:?}", r.report.epsilon, r.report.kappa0),
    ));

    let ball: Distribution = UniformBall::new(1.0, 2)?.into();
    let effort = Effort { restarts: 20, sample_size: 50_000, n_mc: 50_000 };
    let r = margin_report(&ball, "uniform_ball", 2, spec, effort, 50_000, derive(seed, 2))?;
    checks.push(check(
        "uniform ball does not hold and reports an infinite optimal set",
        r.verdict != Verdict::Holds && r.diagnostic.is_some(),
        format!("verdict {}, diagnostic {:?}", r.verdict.as_str(), r.diagnostic),
    ));
    Ok(checks)
}

pub fn gaussian_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let pass = gaussian_condition(1.0, 1.0, 3, 0.01, 1.0, 3.0, 0.1)?;
    checks.push(check(
        "sigma = 0.01 passes",
        pass.holds && (pass.term1 - 0.688).abs() < 1e-3 && pass.term2 < 1e-100,
        format!("term1 {:.6}, term2 {:.3e}", pass.term1, pass.term2),
    ));
    let fail = gaussian_condition(1.0, 1.0, 3, 0.2, 1.0, 3.0, 0.1)?;
    checks.push(check(
        "sigma = 0.2 fails",
        !fail.holds && rel_close(fail.term1, 2.25e4, 1e-2),
        format!("term1 {:.6e}", fail.term1),
    ));
    let tiny = gaussian_condition(1.0, 1.0, 3, 1e-4, 1.0, 3.0, 0.1)?;
    checks.push(check("vanishing sigma passes", tiny.holds, format!("term1 {:.3e}", tiny.term1)));

    let dist = polarized_mixture()?;
    let Distribution::QuasiGaussian(qg) = &dist else { unreachable!() };
    let b_tilde = qg.b_tilde().expect("three components");
    let cond = gaussian_condition(qg.theta_min(), qg.theta_max(), 3, qg.sigma(), b_tilde, qg.radius(), qg.eps_trunc())?;
    checks.push(check(
        "polarized mixture satisfies the condition",
        cond.holds,
        format!("ratio {:.3}, term1 {:.4}, term2 {:.3e}", cond.ratio, cond.term1, cond.term2),
    ));
    let means = Codebook::new(qg.means().to_vec())?;
    let r = true_risk(&means, &dist, GAUSSIAN_MC, derive(seed, 0))?;
    let bound = gaussian_risk_bound(3, qg.theta_max(), qg.sigma(), qg.eps_trunc());
    checks.push(check(
        "risk of the means below 2k theta_max sigma^2 / (1 - eps)",
        r.value <= bound + 3.0 * r.std_error,
        format!("R {:.6e} ± {:.2e}, bound {bound:.6e}", r.value, r.std_error),
    ));
    let optimal = optimal_codebooks(&dist, 3, Effort::default(), derive(seed, 1))?;
    let best = optimal.best_index().expect("nonempty");
    let masses = cell_masses(&optimal.codebooks()[best], &dist, GAUSSIAN_MC, derive(seed, 2))?;
    let pmin = masses.iter().min_by(|a, b| a.value.total_cmp(&b.value)).expect("k cells");
    let lower = gaussian_pmin_lower(qg.theta_min(), qg.sigma(), b_tilde);
    checks.push(check(
        "p_min above theta_min (1 - exp(-9 B^2 / (128 sigma^2)))",
        pmin.value >= lower - 3.0 * pmin.std_error,
        format!("p_min {:.6} ± {:.2e}, lower {lower:.6}", pmin.value, pmin.std_error),
    ));
    let mut area_ok = true;
    let mut detail = String::new();
    for (i, frac) in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 64.0].iter().enumerate() {
        let x = frac * b_tilde;
        let (area, se) = critical_area_mc(&optimal, qg.radius(), x, GAUSSIAN_MC, derive(seed, 3 + i as u64))?;
        let bound = critical_area_bound(3, qg.radius(), x);
        area_ok &= area <= bound + 3.0 * se;
        detail.push_str(&format!("x {x:.4}: area {area:.4e} ± {se:.1e} vs {bound:.4e}; "));
    }
    checks.push(check(
        "critical neighbourhood area below 4 k pi M x",
        area_ok,
        detail.trim_end_matches("; ").to_owned(),
    ));
    Ok(checks)
}
