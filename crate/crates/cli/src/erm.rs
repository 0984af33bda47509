//! Single empirical risk minimisation run with its true and excess risk.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use vqmargin_core::quantizer::{loss, optimal_codebooks, true_risk, ErmMethod, LossEstimate};
use vqmargin_core::seed::derive;
use vqmargin_core::RiskEstimate;

use crate::config::ExperimentConfig;
use crate::convergence::{erm, require_certified};
use crate::report::{ensure_dir, write_json, SCHEMA_VERSION};

pub const REPORT_FILE: &str = "erm.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub family: &'static str,
    pub n: usize,
    pub k: usize,
    pub master_seed: u64,
    pub method: ErmMethod,
    pub restarts: usize,
    pub codebook: Vec<Vec<f64>>,
    pub empirical_risk: f64,
    pub true_risk: RiskEstimate,
    /// Excess risk over a certified optimum, when one is available.
    pub excess_risk: Option<LossEstimate>,
}

pub fn run_erm(cfg: &ExperimentConfig) -> Result<ErmReport> {
    let spec = cfg.distribution_spec()?;
    let dist = spec.build()?;
    let k = cfg.k()?;
    let n = cfg.erm.n.or_else(|| cfg.n_grid.first().copied()).context("`erm` needs `erm.n` or `n_grid`")?;
    let seed = cfg.master_seed;
    let sample = dist.sample(n, derive(seed, 0))?;
    let sol = erm(&sample, k, cfg.restarts, cfg.erm.exhaustive, derive(seed, 1))?;
    let risk = true_risk(&sol.codebook, &dist, cfg.n_mc, derive(seed, 2))?;
    let optimal = optimal_codebooks(&dist, k, cfg.optimal.effort(), derive(seed, u64::MAX))?;
    let excess = match require_certified(&optimal) {
        Ok(()) => Some(loss(&sol.codebook, &dist, &optimal, cfg.n_mc, derive(seed, 2))?),
        Err(_) => None,
    };
    Ok(ErmReport {
        schema_version: SCHEMA_VERSION,
        command: "erm",
        family: spec.family(),
        n,
        k,
        master_seed: seed,
        method: sol.method,
        restarts: sol.restarts,
        codebook: sol.codebook.points().iter().map(|p| p.coords().to_vec()).collect(),
        empirical_risk: sol.risk,
        true_risk: risk,
        excess_risk: excess,
    })
}

pub fn write_erm(out: &ErmReport, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join(REPORT_FILE), out)
}
