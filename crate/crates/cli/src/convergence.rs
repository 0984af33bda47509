//! Convergence-rate sweeps: mean excess risk of ERM against sample size with
//! a weighted log-log slope fit.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;
use vqmargin_core::quantizer::{
    erm_exhaustive, erm_multistart, loss, optimal_codebooks, partition_count, CodebookSet, ErmMethod, ErmSolution,
    SetMethod,
};
use vqmargin_core::seed::{derive, mix};
use vqmargin_core::stats::{fit_loglog, mean_se, SlopeFit};
use vqmargin_core::{Distribution, Point};

use crate::config::ExperimentConfig;
use crate::report::{ensure_dir, write_csv, write_json, OptimalSummary, SCHEMA_VERSION};

/// Samples whose partition count is at most this are solved exhaustively.
pub const EXHAUSTIVE_PARTITIONS: u128 = 10_000;

pub const ROWS_FILE: &str = "convergence.csv";
pub const TIMING_FILE: &str = "convergence_timing.csv";
pub const SUMMARY_FILE: &str = "convergence_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub rep: usize,
    pub excess_risk: f64,
    pub excess_risk_se: f64,
    pub erm_method: ErmMethod,
}

/// Wall-clock timings, kept apart from the reproducible outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub n: usize,
    pub rep: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub mean_excess: f64,
    pub se: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub schema_version: u32,
    pub command: &'static str,
    pub family: &'static str,
    pub k: usize,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub restarts: usize,
    pub n_mc: usize,
    pub master_seed: u64,
    pub optimal: OptimalSummary,
    pub points: Vec<ConvergencePoint>,
    pub slope: Option<SlopeFit>,
    pub slope_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutput {
    pub rows: Vec<ConvergenceRow>,
    pub timing: Vec<TimingRow>,
    pub summary: ConvergenceSummary,
}

/// Refuses optimal sets that cannot serve as the reference risk: approximate
/// searches must have converged on a single codebook.
pub fn require_certified(set: &CodebookSet) -> Result<()> {
    if set.method() == SetMethod::Approximate && set.distinct_near_optimal != 1 {
        bail!(
            "the optimal codebook is not certified: the search found {} distinct near-optimal codebooks; \
             run `margin-report` on this distribution to inspect optimal_codebooks, or raise `optimal.restarts` \
             and `optimal.sample_size`",
            set.distinct_near_optimal
        );
    }
    if set.is_empty() {
        bail!("no optimal codebook was found");
    }
    Ok(())
}

/// ERM on `sample`: partition enumeration when small, multistart Lloyd otherwise.
pub fn erm(sample: &[Point], k: usize, restarts: usize, force_exhaustive: bool, seed: u64) -> Result<ErmSolution> {
    if force_exhaustive || partition_count(sample.len(), k) <= EXHAUSTIVE_PARTITIONS {
        Ok(erm_exhaustive(sample, k)?)
    } else {
        Ok(erm_multistart(sample, k, restarts, seed)?)
    }
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceOutput> {
    let spec = cfg.distribution_spec()?;
    let dist = spec.build()?;
    let k = cfg.k()?;
    let grid = cfg.require_grid()?.to_vec();
    let optimal = optimal_codebooks(&dist, k, cfg.optimal.effort(), derive(cfg.master_seed, u64::MAX))?;
    require_certified(&optimal)?;
    let (rows, timing) = sweep(&dist, &optimal, k, &grid, cfg)?;
    let mut points = Vec::new();
    for (g, &n) in grid.iter().enumerate() {
        let vals: Vec<f64> = rows[g * cfg.reps..(g + 1) * cfg.reps].iter().map(|r| r.excess_risk).collect();
        let (mean_excess, se) = mean_se(&vals)?;
        points.push(ConvergencePoint { n, mean_excess, se, reps: cfg.reps });
    }
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let means: Vec<f64> = points.iter().map(|p| p.mean_excess).collect();
    let ses: Vec<f64> = points.iter().map(|p| p.se).collect();
    let (slope, slope_error) = match fit_loglog(&ns, &means, &ses, cfg.drop_first) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = ConvergenceSummary {
        schema_version: SCHEMA_VERSION,
        command: "convergence",
        family: spec.family(),
        k,
        n_grid: grid,
        reps: cfg.reps,
        restarts: cfg.restarts,
        n_mc: cfg.n_mc,
        master_seed: cfg.master_seed,
        optimal: OptimalSummary::of(&optimal),
        points,
        slope,
        slope_error,
    };
    Ok(ConvergenceOutput { rows, timing, summary })
}

fn sweep(
    dist: &Distribution,
    optimal: &CodebookSet,
    k: usize,
    grid: &[usize],
    cfg: &ExperimentConfig,
) -> Result<(Vec<ConvergenceRow>, Vec<TimingRow>)> {
    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..cfg.reps).map(move |r| (g, r))).collect();
    let out: Vec<(ConvergenceRow, TimingRow)> = tasks
        .par_iter()
        .map(|&(g, r)| {
            let start = Instant::now();
            let n = grid[g];
            let seed = mix(cfg.master_seed, g as u64, r as u64);
            let sample = dist.sample(n, derive(seed, 0))?;
            let sol = erm(&sample, k, cfg.restarts, cfg.erm.exhaustive, derive(seed, 1))?;
            let l = loss(&sol.codebook, dist, optimal, cfg.n_mc, derive(seed, 2))?;
            let row =
                ConvergenceRow { n, rep: r, excess_risk: l.value, excess_risk_se: l.std_error, erm_method: sol.method };
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok((row, TimingRow { n, rep: r, wall_time_ms }))
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().unzip())
}

pub fn write_convergence(out: &ConvergenceOutput, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_csv(&dir.join(ROWS_FILE), &out.rows)?;
    write_csv(&dir.join(TIMING_FILE), &out.timing)?;
    write_json(&dir.join(SUMMARY_FILE), &out.summary)
}
