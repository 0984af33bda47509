use std::cmp::Ordering;

use serde::Serialize;

use super::RiskEstimate;
use crate::geometry::{Codebook, Point};

/// Max-norm distance below which two canonical codebooks are identified.
pub const CANONICAL_TOL: f64 = 1e-6;

fn lex(a: &Point, b: &Point) -> Ordering {
    a.coords().iter().zip(b.coords()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Points sorted lexicographically, a representative modulo relabeling.
pub fn canonical(c: &Codebook) -> Codebook {
    let mut pts = c.points().to_vec();
    pts.sort_by(lex);
    Codebook::new(pts).expect("reordering keeps a valid codebook")
}

/// Max-norm distance between canonical forms; infinite on shape mismatch.
pub fn canonical_distance(a: &Codebook, b: &Codebook) -> f64 {
    if a.k() != b.k() || a.dim() != b.dim() {
        return f64::INFINITY;
    }
    let (a, b) = (canonical(a), canonical(b));
    a.points()
        .iter()
        .zip(b.points())
        .flat_map(|(p, q)| p.coords().iter().zip(q.coords()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetMethod {
    Exhaustive,
    Analytic,
    Approximate,
}

/// Codebooks deduplicated modulo relabeling, each with its risk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodebookSet {
    codebooks: Vec<Codebook>,
    risks: Vec<RiskEstimate>,
    method: SetMethod,
    /// Number of distinct codebooks found within noise of the best one.
    pub distinct_near_optimal: usize,
    /// Restarts spent on the search, when one was run.
    pub budget: Option<usize>,
    /// Distinct chain outputs of the search, near-optimal or not.
    pub distinct_candidates: Option<usize>,
}

impl CodebookSet {
    pub fn new(method: SetMethod) -> Self {
        Self {
            codebooks: Vec::new(),
            risks: Vec::new(),
            method,
            distinct_near_optimal: 0,
            budget: None,
            distinct_candidates: None,
        }
    }

    /// Adds `c` in canonical form unless an identified entry exists.
    /// Returns whether it was added.
    pub fn insert(&mut self, c: Codebook, risk: RiskEstimate) -> bool {
        let c = canonical(&c);
        if self.codebooks.iter().any(|e| canonical_distance(e, &c) <= CANONICAL_TOL) {
            return false;
        }
        self.codebooks.push(c);
        self.risks.push(risk);
        true
    }

    pub fn contains(&self, c: &Codebook) -> bool {
        self.codebooks.iter().any(|e| canonical_distance(e, c) <= CANONICAL_TOL)
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn risks(&self) -> &[RiskEstimate] {
        &self.risks
    }

    pub fn method(&self) -> SetMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.codebooks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codebooks.is_empty()
    }

    /// Entry with the smallest risk value, first on ties.
    pub fn best_index(&self) -> Option<usize> {
        (0..self.risks.len()).min_by(|&a, &b| self.risks[a].value.total_cmp(&self.risks[b].value))
    }

    /// Keeps only entries satisfying `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&Codebook, &RiskEstimate) -> bool) {
        let mut codebooks = Vec::new();
        let mut risks = Vec::new();
        for (c, r) in self.codebooks.drain(..).zip(self.risks.drain(..)) {
            if keep(&c, &r) {
                codebooks.push(c);
                risks.push(r);
            }
        }
        self.codebooks = codebooks;
        self.risks = risks;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::RiskMethod;

    fn cb(rows: &[[f64; 2]]) -> Codebook {
        Codebook::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn canonical_sorts_lexicographically() {
        let c = canonical(&cb(&[[1.0, 0.0], [0.0, 2.0], [0.0, 1.0]]));
        assert_eq!(c, cb(&[[0.0, 1.0], [0.0, 2.0], [1.0, 0.0]]));
    }

    #[test]
    fn dedup_modulo_relabeling() {
        let r = RiskEstimate::exact(1.0, RiskMethod::ExactFinite, 1);
        let mut s = CodebookSet::new(SetMethod::Exhaustive);
        assert!(s.insert(cb(&[[0.0, 0.0], [1.0, 0.0]]), r));
        assert!(!s.insert(cb(&[[1.0, 0.0], [0.0, 0.0]]), r));
        assert!(!s.insert(cb(&[[1.0 + 5e-7, 0.0], [0.0, 0.0]]), r));
        assert!(s.insert(cb(&[[1.0 + 5e-6, 0.0], [0.0, 0.0]]), r));
        assert_eq!(s.len(), 2);
        assert!(s.contains(&cb(&[[1.0, 0.0], [0.0, 0.0]])));
    }

    #[test]
    fn best_prefers_first_on_ties() {
        let mut s = CodebookSet::new(SetMethod::Approximate);
        s.insert(cb(&[[0.0, 0.0]]), RiskEstimate::exact(2.0, RiskMethod::ExactFinite, 1));
        s.insert(cb(&[[1.0, 0.0]]), RiskEstimate::exact(1.0, RiskMethod::ExactFinite, 1));
        s.insert(cb(&[[2.0, 0.0]]), RiskEstimate::exact(1.0, RiskMethod::ExactFinite, 1));
        assert_eq!(s.best_index(), Some(1));
        assert_eq!(CodebookSet::new(SetMethod::Analytic).best_index(), None);
    }
}
