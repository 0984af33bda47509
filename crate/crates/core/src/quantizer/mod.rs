//! Risk evaluation, Lloyd iteration, empirical risk minimization and
//! optimal-codebook discovery.

mod codebook_set;
mod erm;
mod lloyd;
mod optimal;
mod risk;

use serde::Serialize;

pub use codebook_set::{canonical, canonical_distance, CodebookSet, SetMethod, CANONICAL_TOL};
pub use erm::{
    erm_exhaustive, erm_exhaustive_weighted, erm_multistart, erm_multistart_with, partition_count, ErmMethod,
    ErmSolution, InitStrategy, PARTITION_GUARD,
};
pub use lloyd::{lloyd, lloyd_weighted, LloydOptions, LloydResult};
pub use optimal::{optimal_codebooks, Effort};
pub use risk::{
    ball_respecting_assignment, empirical_risk, loss, risk_difference_mc, true_risk, true_risk_mc, weighted_risk,
    LossEstimate, MIN_MC,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMethod {
    ExactFinite,
    ClosedForm,
    MonteCarlo,
}

impl RiskMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExactFinite => "exact-finite",
            Self::ClosedForm => "closed-form",
            Self::MonteCarlo => "monte-carlo",
        }
    }

    pub fn is_exact(self) -> bool {
        !matches!(self, Self::MonteCarlo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: RiskMethod,
    pub n_eval: usize,
}

impl RiskEstimate {
    pub(crate) fn exact(value: f64, method: RiskMethod, n_eval: usize) -> Self {
        Self { value, std_error: 0.0, method, n_eval }
    }
}
