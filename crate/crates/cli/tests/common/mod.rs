#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

pub const BIN: &str = env!("CARGO_BIN_EXE_vqmargin");

/// The adversarial member with `δ = 1/3`, `k = 3`, `d = 2`, `M = 1`.
pub fn cone_family() -> Value {
    json!({"family": "adversarial", "k": 3, "d": 2, "M": 1.0, "delta": 1.0 / 3.0, "sigma": "+-"})
}

/// Three means on the circle of radius 1/2 with `σ = 0.008` and weights
/// `(0.3, 0.3, 0.4)`.
pub fn polarized_mixture() -> Value {
    let means: Vec<[f64; 2]> = [90.0f64, 210.0, 330.0]
        .iter()
        .map(|a| {
            let t = a.to_radians();
            [0.5 * t.cos(), 0.5 * t.sin()]
        })
        .collect();
    json!({"family": "quasi_gaussian", "means": means, "sigma": 0.008, "weights": [0.3, 0.3, 0.4], "radius": 1.0})
}

pub fn three_atoms() -> Value {
    json!({"family": "finite_support", "atoms": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], "weights": [0.2, 0.3, 0.5]})
}

pub fn write_config(dir: &Path, name: &str, cfg: &Value) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

/// Runs the binary with `args`, logging silenced.
pub fn run_bin(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "error").output().expect("binary runs")
}

/// Sorted `(file name, bytes)` of every file in `dir`, skipping `skip`.
pub fn dir_contents(dir: &Path, skip: &[&str]) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| !skip.contains(&e.file_name().to_str().unwrap()))
        .map(|e| (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}
