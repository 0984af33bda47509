//! Nearest-neighbour assignment and Voronoi geometry.
//!
//! Cells are resolved with the usual Voronoi-partition convention: a point
//! equidistant from several code points belongs to the smallest index.

use std::sync::atomic::{AtomicU8, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(coords))
    }

    /// Builds a point without validation. Callers guarantee finiteness.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn origin(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<f64> for Point {
    fn from(v: f64) -> Self {
        Self(vec![v])
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Volume of the unit ball of R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2π/d · V_{d-2}
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut j = if d.is_multiple_of(2) { 2 } else { 3 };
    while j <= d {
        v *= 2.0 * std::f64::consts::PI / j as f64;
        j += 2;
    }
    v
}

/// An ordered list of `k ≥ 1` code points sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Codebook {
    points: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Codebook {
    type Error = Error;

    fn try_from(points: Vec<Point>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<Codebook> for Vec<Point> {
    fn from(c: Codebook) -> Self {
        c.points
    }
}

impl Codebook {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("codebook"))?;
        let d = first.dim();
        for p in &points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
            }
            if p.coords().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { points })
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Point::new).collect::<Result<_>>()?)
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points[i].coords()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// Minimum distance between two code points, `None` when `k = 1`.
    pub fn min_separation(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                let d = dist_sq(self.point(i), self.point(j)).sqrt();
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    /// True if two code points coincide exactly.
    pub fn has_duplicates(&self) -> bool {
        self.min_separation().is_some_and(|s| s == 0.0)
    }

    /// Rejects duplicated code points; margin and minimax computations need
    /// every bisector to be well defined.
    pub fn ensure_distinct(&self) -> Result<()> {
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                if self.point(i) == self.point(j) {
                    return Err(Error::DegenerateBisector { i, j });
                }
            }
        }
        Ok(())
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(Point::norm).fold(0.0, f64::max)
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

/// Result of a nearest-neighbour query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellAssignment {
    pub index: usize,
    pub distance_sq: f64,
}

/// Fault injection for mutation checks of the verification suites.
///
/// The injected fault resolves near-ties toward the *largest* index and widens
/// the tie window to half the minimum squared distance, so it is visible on
/// continuous data where exact ties have probability zero.
pub mod fault {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Fault {
        None = 0,
        LargestIndexTieBreak = 1,
    }

    static ACTIVE: AtomicU8 = AtomicU8::new(0);

    pub fn inject(fault: Fault) {
        ACTIVE.store(fault as u8, Ordering::SeqCst);
    }

    pub fn clear() {
        inject(Fault::None);
    }

    pub fn active() -> Fault {
        match ACTIVE.load(Ordering::Relaxed) {
            1 => Fault::LargestIndexTieBreak,
            _ => Fault::None,
        }
    }
}

/// Unchecked nearest-neighbour scan over raw coordinates.
#[inline]
pub(crate) fn nearest_raw(c: &Codebook, x: &[f64]) -> CellAssignment {
    let mut index = 0;
    let mut best = f64::INFINITY;
    for (j, p) in c.points.iter().enumerate() {
        let d = dist_sq(p.coords(), x);
        if d < best {
            best = d;
            index = j;
        }
    }
    if fault::active() == fault::Fault::LargestIndexTieBreak {
        let window = 1.5 * best;
        for (j, p) in c.points.iter().enumerate().rev() {
            let d = dist_sq(p.coords(), x);
            if d <= window {
                return CellAssignment { index: j, distance_sq: d };
            }
        }
    }
    CellAssignment { index, distance_sq: best }
}

/// Smallest index minimising `‖x − c_j‖²`.
pub fn nearest_index(c: &Codebook, x: &Point) -> Result<CellAssignment> {
    c.check_query(x.coords())?;
    Ok(nearest_raw(c, x.coords()))
}

/// The quantization contrast `γ(c, x) = min_j ‖x − c_j‖²`.
pub fn contrast(c: &Codebook, x: &Point) -> Result<f64> {
    Ok(nearest_index(c, x)?.distance_sq)
}

/// Distance from `x` to the bisector hyperplane of `c_i` and `c_j`.
pub fn bisector_distance(c: &Codebook, i: usize, j: usize, x: &Point) -> Result<f64> {
    c.check_query(x.coords())?;
    for idx in [i, j] {
        if idx >= c.k() {
            return Err(Error::IndexOutOfRange { index: idx, k: c.k() });
        }
    }
    if i == j {
        return Err(Error::DegenerateBisector { i, j });
    }
    let (ci, cj) = (c.point(i), c.point(j));
    let diff: Vec<f64> = ci.iter().zip(cj).map(|(a, b)| a - b).collect();
    let norm = dot(&diff, &diff).sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateBisector { i, j });
    }
    let offset: f64 =
        x.coords().iter().zip(ci.iter().zip(cj)).zip(&diff).map(|((xv, (a, b)), dv)| (xv - 0.5 * (a + b)) * dv).sum();
    Ok(offset.abs() / norm)
}

/// Distance from `x` to the nearest bisector hyperplane bounding its own cell,
/// minimised over the codebooks of `optimal_set`. `+∞` when every codebook has
/// a single point.
///
/// Written as `(‖x − c_j‖² − ‖x − c_i‖²) / (2‖c_i − c_j‖)`, which equals the
/// bisector distance because `i` is the nearest index.
pub fn critical_distance(optimal_set: &[Codebook], x: &Point) -> Result<f64> {
    if optimal_set.is_empty() {
        return Err(Error::Empty("optimal set"));
    }
    let mut best = f64::INFINITY;
    for c in optimal_set {
        c.check_query(x.coords())?;
        best = best.min(critical_distance_raw(c, x.coords())?);
    }
    Ok(best)
}

pub(crate) fn critical_distance_raw(c: &Codebook, x: &[f64]) -> Result<f64> {
    let own = nearest_raw(c, x);
    let ci = c.point(own.index);
    let mut best = f64::INFINITY;
    for (j, p) in c.points.iter().enumerate() {
        if j == own.index {
            continue;
        }
        let sep = dist_sq(ci, p.coords()).sqrt();
        if sep == 0.0 {
            return Err(Error::DegenerateBisector { i: own.index.min(j), j: own.index.max(j) });
        }
        let gap = (dist_sq(p.coords(), x) - own.distance_sq).max(0.0);
        best = best.min(gap / (2.0 * sep));
    }
    Ok(best)
}

/// Superset test for membership in the t-neighbourhood of the critical region:
/// true iff for some optimal codebook the point lies within `t` of a bisector
/// hyperplane of its own cell.
pub fn critical_membership(optimal_set: &[Codebook], t: f64, x: &Point) -> Result<bool> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    Ok(critical_distance(optimal_set, x)? <= t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn cb(rows: &[&[f64]]) -> Codebook {
        Codebook::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn tie_goes_to_smallest_index() {
        let c = cb(&[&[-1.0], &[1.0]]);
        let a = nearest_index(&c, &Point::from(0.0)).unwrap();
        assert_eq!(a.index, 0);
        assert_eq!(a.distance_sq, 1.0);
    }

    #[test]
    fn nearest_simple_cases() {
        let c = cb(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let a = nearest_index(&c, &Point::from([0.75, 0.0])).unwrap();
        assert_eq!(a.index, 1);
        assert!((a.distance_sq - 0.0625).abs() < 1e-15);
        assert!((contrast(&c, &Point::from([0.75, 0.0])).unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(contrast(&c, &Point::from([1.0, 0.0])).unwrap(), 0.0);

        let single = cb(&[&[0.0, 0.0]]);
        let x = Point::from([0.3, -0.4]);
        let a = nearest_index(&single, &x).unwrap();
        assert_eq!(a.index, 0);
        assert!((a.distance_sq - 0.25).abs() < 1e-15);
    }

    #[test]
    fn query_errors() {
        let c = cb(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            nearest_index(&c, &Point::from(0.0)),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert_eq!(Point::new(vec![f64::NAN]), Err(Error::NonFinite));
        assert!(Codebook::from_rows(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
        assert!(Codebook::new(vec![]).is_err());
    }

    #[test]
    fn contrast_matches_brute_force_in_3d() {
        let mut rng = crate::seed::rng(11);
        for _ in 0..200 {
            let k = rng.random_range(1..6);
            let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let c = Codebook::from_rows(rows.clone()).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mut brute = f64::INFINITY;
            for r in &rows {
                let mut s = 0.0;
                for t in 0..3 {
                    s += (r[t] - x[t]).powi(2);
                }
                brute = brute.min(s);
            }
            let got = contrast(&c, &Point::new(x).unwrap()).unwrap();
            assert!((got - brute).abs() <= 1e-15 * brute.max(1.0));
        }
    }

    #[test]
    fn bisector_distance_cases() {
        let c = cb(&[&[0.0], &[2.0]]);
        assert!((bisector_distance(&c, 0, 1, &Point::from(0.25)).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(bisector_distance(&c, 0, 1, &Point::from(1.0)).unwrap(), 0.0);
        let dup = cb(&[&[1.0], &[1.0]]);
        assert_eq!(bisector_distance(&dup, 0, 1, &Point::from(0.0)), Err(Error::DegenerateBisector { i: 0, j: 1 }));
    }

    /// Distance to the bisector plane found by projected gradient descent on
    /// `‖y − x‖²` subject to `‖y − c_i‖² = ‖y − c_j‖²`.
    fn projected_gradient_distance(ci: [f64; 2], cj: [f64; 2], x: [f64; 2]) -> f64 {
        // The constraint is linear: <y, a> = b with a = c_i − c_j.
        let a = [ci[0] - cj[0], ci[1] - cj[1]];
        let b = 0.5 * ((ci[0] * ci[0] + ci[1] * ci[1]) - (cj[0] * cj[0] + cj[1] * cj[1]));
        let aa = a[0] * a[0] + a[1] * a[1];
        let project = |y: [f64; 2]| {
            let s = (a[0] * y[0] + a[1] * y[1] - b) / aa;
            [y[0] - s * a[0], y[1] - s * a[1]]
        };
        let mut y = project([0.0, 0.0]);
        for _ in 0..500 {
            let g = [2.0 * (y[0] - x[0]), 2.0 * (y[1] - x[1])];
            y = project([y[0] - 0.1 * g[0], y[1] - 0.1 * g[1]]);
        }
        ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt()
    }

    #[test]
    fn bisector_distance_matches_projected_gradient() {
        let mut rng = crate::seed::rng(5);
        for _ in 0..100 {
            let mut r = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (ci, cj, x) = (r(), r(), r());
            let c = Codebook::from_rows(vec![ci.to_vec(), cj.to_vec()]).unwrap();
            let got = bisector_distance(&c, 0, 1, &Point::from(x)).unwrap();
            let oracle = projected_gradient_distance(ci, cj, x);
            assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        }
    }

    #[test]
    fn critical_membership_cases() {
        let set = vec![cb(&[&[-1.0], &[1.0]])];
        assert!(critical_membership(&set, 0.2, &Point::from(0.1)).unwrap());
        assert!(!critical_membership(&set, 0.2, &Point::from(0.5)).unwrap());
        assert!(!critical_membership(&set, 0.0, &Point::from(0.5)).unwrap());
        assert!(critical_membership(&set, 0.0, &Point::from(0.0)).unwrap());
        assert_eq!(critical_membership(&[], 0.1, &Point::from(0.0)), Err(Error::Empty("optimal set")));
    }

    #[test]
    fn unit_ball_volumes() {
        let pi = std::f64::consts::PI;
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - pi).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * pi / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - pi * pi / 2.0).abs() < 1e-14);
    }

    fn coords(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, d)
    }

    proptest! {
        #[test]
        fn permuting_codebook_permutes_index(
            rows in proptest::collection::vec(coords(2), 1..7),
            x in coords(2),
            shift in 0usize..7,
        ) {
            let k = rows.len();
            let c = Codebook::from_rows(rows.clone()).unwrap();
            // rotate the labels
            let perm: Vec<usize> = (0..k).map(|i| (i + shift) % k).collect();
            let permuted = Codebook::from_rows(perm.iter().map(|&p| rows[p].clone()).collect()).unwrap();
            let x = Point::new(x).unwrap();
            let a = nearest_index(&c, &x).unwrap();
            let b = nearest_index(&permuted, &x).unwrap();
            prop_assert_eq!(a.distance_sq, b.distance_sq);
            // the permuted answer is the least new label among all minimisers
            let minimisers: Vec<usize> = (0..k)
                .filter(|&i| dist_sq(permuted.point(i), x.coords()) == b.distance_sq)
                .collect();
            prop_assert_eq!(b.index, minimisers[0]);
            prop_assert!(minimisers.iter().any(|&i| perm[i] == a.index));
        }

        #[test]
        fn membership_is_monotone_in_t(
            rows in proptest::collection::vec(coords(2), 2..6),
            x in coords(2),
            t1 in 0.0f64..1.0,
            dt in 0.0f64..1.0,
        ) {
            let c = Codebook::from_rows(rows).unwrap();
            prop_assume!(!c.has_duplicates());
            let set = vec![c];
            let x = Point::new(x).unwrap();
            if critical_membership(&set, t1, &x).unwrap() {
                prop_assert!(critical_membership(&set, t1 + dt, &x).unwrap());
            }
        }
    }
}
