//! Minimax sweeps over the adversarial family.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use vqmargin_core::minimax::{build_family, minimax_experiment, MinimaxOptions, MinimaxPoint};
use vqmargin_core::quantizer::RiskMethod;
use vqmargin_core::stats::SlopeFit;
use vqmargin_core::AdversarialFamily;

use crate::config::{ExperimentConfig, MinimaxSpec};
use crate::convergence::erm;
use crate::report::{ensure_dir, write_csv, write_json, SCHEMA_VERSION};

pub const ROWS_FILE: &str = "minimax.csv";
pub const SUMMARY_FILE: &str = "minimax_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxCsvRow {
    pub n: usize,
    pub sigma_id: String,
    pub rep: usize,
    pub excess_risk: f64,
    pub method: RiskMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxSummary {
    pub schema_version: u32,
    pub command: &'static str,
    pub family: MinimaxSpec,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub restarts: usize,
    pub n_mc: usize,
    pub master_seed: u64,
    pub points: Vec<MinimaxPoint>,
    /// Fit over grid points whose δ was not clamped.
    pub slope: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxOutput {
    pub rows: Vec<MinimaxCsvRow>,
    pub summary: MinimaxSummary,
}

pub fn run_minimax_demo(cfg: &ExperimentConfig) -> Result<MinimaxOutput> {
    let spec = cfg.minimax;
    let grid = cfg.require_grid()?.to_vec();
    let builder = |n: usize| -> vqmargin_core::Result<AdversarialFamily> {
        match spec.fixed_delta {
            Some(delta) => AdversarialFamily::with_delta(spec.k, spec.d, spec.radius, delta),
            None => build_family(spec.k, spec.d, spec.radius, n),
        }
    };
    let restarts = cfg.restarts;
    let force = cfg.erm.exhaustive;
    let algorithm =
        |x: &[vqmargin_core::Point], k: usize, seed: u64| -> vqmargin_core::Result<vqmargin_core::Codebook> {
            erm(x, k, restarts, force, seed)
                .map(|s| s.codebook)
                .map_err(|e| vqmargin_core::Error::InvalidParameter(e.to_string()))
        };
    let options = MinimaxOptions { pattern_cap: spec.pattern_cap, n_mc: cfg.n_mc };
    let table = minimax_experiment(builder, algorithm, &grid, cfg.reps, options, cfg.master_seed)?;
    let rows = table
        .rows
        .iter()
        .map(|r| MinimaxCsvRow {
            n: r.n,
            sigma_id: r.sigma_id.clone(),
            rep: r.rep,
            excess_risk: r.excess_risk,
            method: r.method,
        })
        .collect();
    let summary = MinimaxSummary {
        schema_version: SCHEMA_VERSION,
        command: "minimax-demo",
        family: spec,
        n_grid: grid,
        reps: cfg.reps,
        restarts: cfg.restarts,
        n_mc: cfg.n_mc,
        master_seed: cfg.master_seed,
        points: table.points,
        slope: table.slope,
    };
    Ok(MinimaxOutput { rows, summary })
}

pub fn write_minimax(out: &MinimaxOutput, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_csv(&dir.join(ROWS_FILE), &out.rows)?;
    write_json(&dir.join(SUMMARY_FILE), &out.summary)
}
