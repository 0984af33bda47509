//! Acceptance gate: twelve criteria, each with its tolerance and time limit.
//! Prints one PASS/FAIL line per criterion to stderr and fails if any
//! criterion fails.

mod common;

use std::io::Write as _;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use vqmargin_cli::config::ExperimentConfig;
use vqmargin_cli::convergence::run_convergence;
use vqmargin_cli::minimax_demo::run_minimax_demo;
use vqmargin_cli::verify::{run_suite, SuiteResult};

const SEED: u64 = 0;
const FAST_BAND: (f64, f64) = (-1.35, -0.65);
const SLOW_BAND: (f64, f64) = (-0.75, -0.25);
const GRID: [usize; 7] = [64, 128, 256, 512, 1024, 2048, 4096];
const REPS: usize = 50;

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_suite(s: SuiteResult) -> Outcome {
    let mut detail: Vec<String> = s
        .checks
        .iter()
        .map(|c| format!("[{}] {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail))
        .collect();
    if let Some(e) = s.error {
        detail.push(format!("error: {e}"));
    }
    Outcome { passed: s.passed, detail: detail.join("; ") }
}

fn suite(name: &str) -> Outcome {
    from_suite(run_suite(name, SEED))
}

fn in_band(slope: Option<f64>, band: (f64, f64)) -> bool {
    slope.is_some_and(|s| s >= band.0 && s <= band.1)
}

fn config(cfg: Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&cfg.to_string()).expect("valid configuration")
}

fn convergence_slope(distribution: Value, k: usize) -> Outcome {
    let cfg = config(json!({"command": "convergence", "distribution": distribution, "k": k, "n_grid": GRID,
                            "reps": REPS, "restarts": 10, "n_mc": 200_000, "master_seed": SEED}));
    match run_convergence(&cfg) {
        Ok(out) => {
            let slope = out.summary.slope.as_ref().map(|s| s.slope);
            Outcome {
                passed: in_band(slope, FAST_BAND),
                detail: format!(
                    "slope {slope:?}, band {FAST_BAND:?}, ci {:?}",
                    out.summary.slope.map(|s| (s.ci_low, s.ci_high))
                ),
            }
        }
        Err(e) => Outcome { passed: false, detail: format!("error: {e:#}") },
    }
}

fn criterion_8_cone() -> Outcome {
    convergence_slope(common::cone_family(), 3)
}

fn criterion_8_gaussian() -> Outcome {
    convergence_slope(common::polarized_mixture(), 3)
}

fn criterion_9() -> Outcome {
    let cfg = config(json!({"command": "minimax-demo", "n_grid": GRID, "reps": REPS, "restarts": 10,
                            "n_mc": 200_000, "master_seed": SEED, "minimax": {"k": 3, "d": 2, "M": 1.0}}));
    match run_minimax_demo(&cfg) {
        Ok(out) => {
            let slope = out.summary.slope.as_ref().map(|s| s.slope);
            let clamped = out.summary.points.iter().filter(|p| p.delta_clamped).count();
            Outcome {
                passed: in_band(slope, SLOW_BAND),
                detail: format!("sup-excess slope {slope:?}, band {SLOW_BAND:?}, {clamped} clamped grid points"),
            }
        }
        Err(e) => Outcome { passed: false, detail: format!("error: {e:#}") },
    }
}

fn criterion_12() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let experiments = [
        (
            "convergence",
            json!({"command": "convergence", "distribution": common::cone_family(),
                               "n_grid": [64, 128, 256], "reps": 10, "master_seed": SEED}),
        ),
        (
            "minimax-demo",
            json!({"command": "minimax-demo", "n_grid": [64, 128], "reps": 5, "n_mc": 50_000, "master_seed": SEED}),
        ),
        ("verify", json!({"command": "verify", "suites": ["erm-oracle", "hellinger"], "master_seed": SEED})),
    ];
    let mut details = Vec::new();
    let mut passed = true;
    for (i, (command, cfg)) in experiments.iter().enumerate() {
        let path = common::write_config(tmp.path(), &format!("cfg{i}.json"), cfg);
        let mut reference = None;
        for threads in [1, 2, 8] {
            let out = tmp.path().join(format!("out{i}_{threads}"));
            let t = threads.to_string();
            let res = common::run_bin(&[
                command,
                "--config",
                path.to_str().unwrap(),
                "--threads",
                &t,
                "--out",
                out.to_str().unwrap(),
            ]);
            if !res.status.success() {
                passed = false;
                details.push(format!("{command} at {threads} threads exited with {:?}", res.status.code()));
                continue;
            }
            let files = common::dir_contents(&out, &["convergence_timing.csv"]);
            match &reference {
                None => reference = Some(files),
                Some(r) if *r == files => {}
                Some(_) => {
                    passed = false;
                    details.push(format!("{command} differs at {threads} threads"));
                }
            }
        }
        if let Some(r) = reference {
            details.push(format!("{command}: {} files identical at 1/2/8 threads", r.len()));
        }
    }
    Outcome { passed, detail: details.join("; ") }
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 13] = [
        ("1 cone moment", 5, || suite("cone")),
        ("2 risk-gap identity", 30, || suite("risk-gap")),
        ("3 Hellinger affinity", 1, || suite("hellinger")),
        ("4 ERM oracle", 60, || suite("erm-oracle")),
        ("5 Voronoi boundary audit", 30, || suite("voronoi")),
        ("6 key inequality audit", 300, || suite("kappa")),
        ("7 quantizer reduction", 300, || suite("reduction")),
        ("8a fast rate, cone family", 300, criterion_8_cone),
        ("8b fast rate, polarized mixture", 300, criterion_8_gaussian),
        ("9 slow rate, minimax sweep", 600, criterion_9),
        ("10 margin verdicts", 300, || suite("margin")),
        ("11 Gaussian condition", 300, || suite("gaussian")),
        ("12 determinism", 600, criterion_12),
    ];
    let mut failed = Vec::new();
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let on_time = elapsed <= Duration::from_secs(limit);
        let ok = outcome.passed && on_time;
        if !ok {
            failed.push(name);
        }
        let _ = writeln!(
            std::io::stderr(),
            "criterion {name}: {} ({:.2} s of {limit} s){}; {}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if on_time { "" } else { ", over the time limit" },
            outcome.detail
        );
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
