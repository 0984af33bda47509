//! Margin reports: optimal codebooks, `B`, `p_min`, the weight function on a
//! grid, the verdict, ε-separation and `κ₀`.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use vqmargin_core::margin::{certified_radius, margin_check, optimum_spread, separation, OptimumSpread};
use vqmargin_core::quantizer::{optimal_codebooks, Effort, SetMethod};
use vqmargin_core::seed::derive;
use vqmargin_core::{Distribution, MarginReport, SeparationReport, Verdict};

use crate::config::{ExperimentConfig, MarginSpec};
use crate::report::{ensure_dir, write_json, OptimalSummary, SCHEMA_VERSION};

pub const REPORT_FILE: &str = "margin_report.json";

/// Where the tested radius came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusSource {
    Config,
    Known,
    Certified,
    /// No radius could be certified; the largest candidate was tested.
    Uncertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReportOutput {
    pub schema_version: u32,
    pub command: &'static str,
    pub family: &'static str,
    pub k: usize,
    pub master_seed: u64,
    pub n_mc: usize,
    pub effort: Effort,
    pub optimal: OptimalSummary,
    pub r0_source: RadiusSource,
    pub report: MarginReport,
    pub separation: Option<SeparationReport>,
    pub spread: Option<OptimumSpread>,
    /// Final verdict, downgraded to `inconclusive` when the optimal set
    /// appears infinite.
    pub verdict: Verdict,
    pub diagnostic: Option<String>,
}

/// Independent searches run by the infinite-optimum probe.
pub const SPREAD_SEARCHES: usize = 8;

/// Cluster radius of the probe, relative to the support radius.
pub const SPREAD_TOL: f64 = 0.05;

/// Probe effort: a quarter of the main search, with a floor.
fn spread_effort(effort: Effort) -> Effort {
    Effort {
        restarts: (effort.restarts / 4).max(2),
        sample_size: (effort.sample_size / 4).max(5_000),
        n_mc: (effort.n_mc / 4).max(5_000),
    }
}

/// Infinitely many optima are suspected when independent searches keep
/// landing in new clusters: at least three, and at least half the searches.
pub fn infinite_optimum_suspected(spread: &OptimumSpread) -> bool {
    spread.clusters >= 3 && 2 * spread.clusters >= spread.searches
}

#[allow(clippy::too_many_arguments)]
pub fn margin_report(
    dist: &Distribution,
    family: &'static str,
    k: usize,
    spec: MarginSpec,
    effort: Effort,
    n_mc: usize,
    seed: u64,
) -> Result<MarginReportOutput> {
    let optimal = optimal_codebooks(dist, k, effort, derive(seed, 0))?;
    let known = dist.known_optimum(k);
    let (r0, r0_source) = if let Some(r) = spec.r0 {
        (r, RadiusSource::Config)
    } else if let Some(opt) = known {
        (opt.margin_radius, RadiusSource::Known)
    } else {
        let r_max = 2.0 * dist.radius();
        match certified_radius(&optimal, dist, r_max, spec.grid_size, n_mc, derive(seed, 1))? {
            Some(r) => (r, RadiusSource::Certified),
            None => (r_max, RadiusSource::Uncertified),
        }
    };
    let mut report = margin_check(&optimal, dist, r0, spec.grid_size, n_mc, derive(seed, 1))?;
    let mut diagnostic = None;
    let mut verdict = report.verdict;
    let mut spread = None;
    if optimal.method() == SetMethod::Approximate {
        let s = optimum_spread(
            dist,
            k,
            SPREAD_SEARCHES,
            spread_effort(effort),
            SPREAD_TOL * dist.radius(),
            derive(seed, 3),
        )?;
        if infinite_optimum_suspected(&s) {
            diagnostic = Some(format!(
                "infinite set of optimal codebooks suspected: {} independent searches landed in {} clusters of radius {}",
                s.searches, s.clusters, s.tol
            ));
            if verdict == Verdict::Holds {
                verdict = Verdict::Inconclusive;
            }
        }
        spread = Some(s);
    }
    let mut sep = None;
    if verdict == Verdict::Holds && k >= 2 {
        let epsilon = match known {
            Some(opt) => opt.separation,
            None => {
                let s = separation(dist, k, spec.separation_budget, effort, derive(seed, 2))?;
                let e = s.epsilon;
                sep = Some(s);
                e
            }
        };
        report.attach_separation(k, epsilon)?;
    }
    Ok(MarginReportOutput {
        schema_version: SCHEMA_VERSION,
        command: "margin-report",
        family,
        k,
        master_seed: seed,
        n_mc,
        effort,
        optimal: OptimalSummary::of(&optimal),
        r0_source,
        report,
        separation: sep,
        spread,
        verdict,
        diagnostic,
    })
}

pub fn run_margin_report(cfg: &ExperimentConfig) -> Result<MarginReportOutput> {
    let spec = cfg.distribution_spec()?;
    let dist = spec.build()?;
    margin_report(&dist, spec.family(), cfg.k()?, cfg.margin, cfg.optimal.effort(), cfg.n_mc, cfg.master_seed)
}

pub fn write_margin_report(out: &MarginReportOutput, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join(REPORT_FILE), out)
}
