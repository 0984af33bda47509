//! Output writers. CSV files carry a header row; JSON reports are pretty
//! printed with a trailing newline and a `schema_version` field.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use vqmargin_core::quantizer::{CodebookSet, SetMethod};

pub const SCHEMA_VERSION: u32 = 1;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV consisting of a header only when `rows` is empty.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(f, "{}", header.join(","))?;
        return Ok(());
    }
    write_csv(path, rows)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Summary of an optimal-codebook set as echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSummary {
    pub method: SetMethod,
    pub count: usize,
    pub distinct_near_optimal: usize,
    pub budget: Option<usize>,
    pub distinct_candidates: Option<usize>,
    pub best_risk: f64,
    pub best_risk_se: f64,
    pub codebooks: Vec<Vec<Vec<f64>>>,
}

impl OptimalSummary {
    pub fn of(set: &CodebookSet) -> Self {
        let best = set.best_index();
        Self {
            method: set.method(),
            count: set.len(),
            distinct_near_optimal: set.distinct_near_optimal,
            budget: set.budget,
            distinct_candidates: set.distinct_candidates,
            best_risk: best.map_or(f64::NAN, |i| set.risks()[i].value),
            best_risk_se: best.map_or(f64::NAN, |i| set.risks()[i].std_error),
            codebooks: set
                .codebooks()
                .iter()
                .map(|c| c.points().iter().map(|p| p.coords().to_vec()).collect())
                .collect(),
        }
    }
}
