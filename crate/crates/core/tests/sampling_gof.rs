//! Goodness-of-fit checks of the samplers against independently written
//! distribution functions.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use vqmargin_core::distributions::build_quasi_gaussian;
use vqmargin_core::seed::{self, derive};
use vqmargin_core::{ConeBallDistribution, Distribution, FiniteSupport, Point, UniformBall};

/// Upper-tail p-value of Pearson's statistic for observed counts against
/// expected probabilities.
fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.iter().position(|&e| v < e).unwrap_or(edges.len()) - 1
}

/// Radial CDF of the normalised cone `(1 − s)₊` on the unit ball, written out
/// for the dimensions under test.
fn cone_cdf(s: f64, d: usize) -> f64 {
    match d {
        2 => 3.0 * s * s - 2.0 * s * s * s,
        3 => 4.0 * s.powi(3) - 3.0 * s.powi(4),
        _ => unreachable!(),
    }
}

#[test]
fn cone_ball_radial_profile() {
    for d in [2usize, 3] {
        let mut c = vec![0.0; d];
        c[0] = 0.3;
        let rho = 0.2;
        let dist: Distribution =
            ConeBallDistribution::new(vec![Point::new(c.clone()).unwrap()], rho, vec![1.0], 1.0).unwrap().into();
        let xs = dist.sample(200_000, 17).unwrap();
        let bins = 20;
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0u64; bins];
        for x in &xs {
            let r = x.coords().iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / rho;
            counts[bin_of(&edges, r).min(bins - 1)] += 1;
        }
        let probs: Vec<f64> = edges.windows(2).map(|w| cone_cdf(w[1], d) - cone_cdf(w[0], d)).collect();
        let p = chi_square_p(&counts, &probs);
        assert!(p > 1e-4, "d = {d}: p = {p}");
    }
}

#[test]
fn cone_ball_angles_are_uniform() {
    let dist: Distribution =
        ConeBallDistribution::new(vec![Point::from([0.0, 0.0])], 0.5, vec![1.0], 1.0).unwrap().into();
    let xs = dist.sample(120_000, 5).unwrap();
    let sectors = 12;
    let mut counts = vec![0u64; sectors];
    for x in &xs {
        let a = x.coords()[1].atan2(x.coords()[0]) + std::f64::consts::PI;
        counts[((a / (2.0 * std::f64::consts::PI) * sectors as f64) as usize).min(sectors - 1)] += 1;
    }
    let p = chi_square_p(&counts, &vec![1.0 / sectors as f64; sectors]);
    assert!(p > 1e-4, "p = {p}");
}

#[test]
fn cone_ball_masses_are_respected() {
    let centers = vec![Point::from([-0.5, 0.0]), Point::from([0.0, 0.5]), Point::from([0.5, 0.0])];
    let masses = vec![0.5, 0.3, 0.2];
    let cb = ConeBallDistribution::new(centers, 0.1, masses.clone(), 1.0).unwrap();
    let dist: Distribution = cb.clone().into();
    let xs = dist.sample(90_000, 8).unwrap();
    let mut counts = vec![0u64; 3];
    for x in &xs {
        counts[cb.ball_of(x.coords()).expect("every draw lies in a ball")] += 1;
    }
    let p = chi_square_p(&counts, &masses);
    assert!(p > 1e-4, "p = {p}");
}

#[test]
fn uniform_ball_radial_profile() {
    let d = 3;
    let dist: Distribution = UniformBall::new(2.0, d).unwrap().into();
    let xs = dist.sample(100_000, 3).unwrap();
    let bins = 16;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut counts = vec![0u64; bins];
    for x in &xs {
        counts[bin_of(&edges, x.norm() / 2.0).min(bins - 1)] += 1;
    }
    let probs: Vec<f64> = edges.windows(2).map(|w| w[1].powi(3) - w[0].powi(3)).collect();
    let p = chi_square_p(&counts, &probs);
    assert!(p > 1e-4, "p = {p}");
}

#[test]
fn finite_support_frequencies() {
    let atoms =
        vec![Point::from([0.0, 0.0]), Point::from([1.0, 0.0]), Point::from([0.0, 1.0]), Point::from([1.0, 1.0])];
    let w = vec![0.1, 0.2, 0.3, 0.4];
    let dist: Distribution = FiniteSupport::new(atoms.clone(), w.clone(), None).unwrap().into();
    let xs = dist.sample(50_000, 21).unwrap();
    let mut counts = vec![0u64; 4];
    for x in &xs {
        counts[atoms.iter().position(|a| a == x).unwrap()] += 1;
    }
    let p = chi_square_p(&counts, &w);
    assert!(p > 1e-4, "p = {p}");
}

#[test]
fn quasi_gaussian_labels_and_conditional_means() {
    let means = vec![Point::from([-0.5, 0.0]), Point::from([0.5, 0.0]), Point::from([0.0, 0.5])];
    let weights = vec![0.25, 0.35, 0.4];
    let sigma = 0.05;
    let qg = build_quasi_gaussian(means.clone(), sigma, weights.clone(), 1.0).unwrap();
    let n = 60_000;
    let mut rng = seed::rng(derive(9, 0));
    let mut counts = vec![0u64; 3];
    let mut sums = [[0.0f64; 2]; 3];
    let mut sq = [[0.0f64; 2]; 3];
    for _ in 0..n {
        let (i, x) = qg.draw_labelled(&mut rng);
        assert!(x.norm() <= 1.0);
        counts[i] += 1;
        for a in 0..2 {
            sums[i][a] += x.coords()[a];
            sq[i][a] += x.coords()[a] * x.coords()[a];
        }
    }
    assert!(chi_square_p(&counts, &weights) > 1e-4);
    for i in 0..3 {
        let c = counts[i] as f64;
        for a in 0..2 {
            let mean = sums[i][a] / c;
            let se = ((sq[i][a] / c - mean * mean) / c).sqrt();
            assert!((mean - means[i].coords()[a]).abs() <= 4.0 * se, "component {i} axis {a}: {mean}");
            assert!((se * c.sqrt() - sigma).abs() < 0.05 * sigma);
        }
    }
}

#[test]
fn samples_are_prefix_consistent_and_seeded() {
    let dist: Distribution = UniformBall::new(1.0, 2).unwrap().into();
    let a = dist.sample(10_000, 4).unwrap();
    let b = dist.sample(20_000, 4).unwrap();
    assert_eq!(&b[..10_000], &a[..]);
    assert_ne!(dist.sample(100, 5).unwrap(), a[..100].to_vec());
}
