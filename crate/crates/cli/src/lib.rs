//! Experiment runners behind the `vqmargin` binary: convergence sweeps, margin
//! reports, minimax sweeps, single ERM runs and the verification suites.

pub mod config;
pub mod convergence;
pub mod erm;
pub mod margin_report;
pub mod minimax_demo;
pub mod report;
pub mod verify;

use anyhow::Result;

use crate::config::{Command, ExperimentConfig};

/// Runs the configured command and writes its outputs to `cfg.output.dir`.
/// Returns `false` when a verification run has failing suites.
pub fn run(cfg: &ExperimentConfig, fault: Option<String>) -> Result<bool> {
    let dir = &cfg.output.dir;
    match cfg.command {
        Command::Convergence => {
            let out = convergence::run_convergence(cfg)?;
            convergence::write_convergence(&out, dir)?;
            if let Some(s) = &out.summary.slope {
                tracing::info!(slope = s.slope, ci_low = s.ci_low, ci_high = s.ci_high, "convergence slope");
            }
        }
        Command::MarginReport => {
            let out = margin_report::run_margin_report(cfg)?;
            margin_report::write_margin_report(&out, dir)?;
            tracing::info!(verdict = out.verdict.as_str(), "margin report");
        }
        Command::MinimaxDemo => {
            let out = minimax_demo::run_minimax_demo(cfg)?;
            minimax_demo::write_minimax(&out, dir)?;
            if let Some(s) = &out.summary.slope {
                tracing::info!(slope = s.slope, ci_low = s.ci_low, ci_high = s.ci_high, "minimax slope");
            }
        }
        Command::Erm => {
            let out = erm::run_erm(cfg)?;
            erm::write_erm(&out, dir)?;
        }
        Command::Verify => {
            let report = verify::run_verify(&cfg.suites, cfg.master_seed, fault)?;
            verify::write_verify(&report, dir)?;
            for s in &report.suites {
                println!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name);
                for c in s.checks.iter().filter(|c| !c.passed) {
                    println!("  failed: {} ({})", c.name, c.detail);
                }
                if let Some(e) = &s.error {
                    println!("  error: {e}");
                }
            }
            return Ok(report.passed);
        }
    }
    Ok(true)
}
