//! Experiment configuration: a strict JSON schema with a family-tagged
//! distribution description.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vqmargin_core::distributions::build_quasi_gaussian;
use vqmargin_core::minimax::{build_family, p_sigma};
use vqmargin_core::quantizer::Effort;
use vqmargin_core::{
    AdversarialFamily, ConeBallDistribution, Distribution, FiniteSupport, Point, SignVector, UniformBall,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Convergence,
    MarginReport,
    MinimaxDemo,
    Verify,
    Erm,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::MarginReport => "margin-report",
            Self::MinimaxDemo => "minimax-demo",
            Self::Verify => "verify",
            Self::Erm => "erm",
        }
    }
}

/// A source distribution, tagged by `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    FiniteSupport {
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
        #[serde(default)]
        radius: Option<f64>,
    },
    QuasiGaussian {
        means: Vec<Vec<f64>>,
        sigma: f64,
        weights: Vec<f64>,
        radius: f64,
    },
    ConeBall {
        centers: Vec<Vec<f64>>,
        rho: f64,
        masses: Vec<f64>,
        radius: f64,
    },
    UniformBall {
        radius: f64,
        dim: usize,
    },
    /// One member `P_σ` of the adversarial family, with `δ` either fixed or
    /// tuned to a sample size `n`.
    Adversarial {
        k: usize,
        d: usize,
        #[serde(rename = "M")]
        radius: f64,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        n: Option<usize>,
        sigma: String,
    },
}

fn points(rows: &[Vec<f64>]) -> Result<Vec<Point>> {
    rows.iter().map(|r| Point::new(r.clone()).map_err(Into::into)).collect()
}

impl DistributionSpec {
    pub fn family(&self) -> &'static str {
        match self {
            Self::FiniteSupport { .. } => "finite_support",
            Self::QuasiGaussian { .. } => "quasi_gaussian",
            Self::ConeBall { .. } => "cone_ball",
            Self::UniformBall { .. } => "uniform_ball",
            Self::Adversarial { .. } => "adversarial",
        }
    }

    /// The adversarial family behind an `adversarial` spec.
    pub fn family_object(&self) -> Result<Option<(AdversarialFamily, SignVector)>> {
        let Self::Adversarial { k, d, radius, delta, n, sigma } = self else { return Ok(None) };
        let fam = match (delta, n) {
            (Some(delta), None) => AdversarialFamily::with_delta(*k, *d, *radius, *delta)?,
            (None, Some(n)) => build_family(*k, *d, *radius, *n)?,
            _ => bail!("adversarial distribution needs exactly one of `delta` and `n`"),
        };
        Ok(Some((fam, SignVector::parse(sigma)?)))
    }

    pub fn build(&self) -> Result<Distribution> {
        Ok(match self {
            Self::FiniteSupport { atoms, weights, radius } => {
                FiniteSupport::new(points(atoms)?, weights.clone(), *radius)?.into()
            }
            Self::QuasiGaussian { means, sigma, weights, radius } => {
                build_quasi_gaussian(points(means)?, *sigma, weights.clone(), *radius)?.into()
            }
            Self::ConeBall { centers, rho, masses, radius } => {
                ConeBallDistribution::new(points(centers)?, *rho, masses.clone(), *radius)?.into()
            }
            Self::UniformBall { radius, dim } => UniformBall::new(*radius, *dim)?.into(),
            Self::Adversarial { .. } => {
                let (fam, sigma) = self.family_object()?.expect("adversarial distribution");
                p_sigma(&fam, &sigma)?.into()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self { dir: default_out_dir() }
    }
}

/// Search budget for optimal-codebook discovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimalSpec {
    pub restarts: usize,
    pub sample_size: usize,
    pub n_mc: usize,
}

impl Default for OptimalSpec {
    fn default() -> Self {
        let e = Effort::default();
        Self { restarts: e.restarts, sample_size: e.sample_size, n_mc: e.n_mc }
    }
}

impl OptimalSpec {
    pub fn effort(&self) -> Effort {
        Effort { restarts: self.restarts, sample_size: self.sample_size, n_mc: self.n_mc }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginSpec {
    pub grid_size: usize,
    /// Radius to test; when absent the known or certified radius is used.
    pub r0: Option<f64>,
    pub separation_budget: usize,
}

impl Default for MarginSpec {
    fn default() -> Self {
        Self { grid_size: 64, r0: None, separation_budget: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaxSpec {
    pub k: usize,
    pub d: usize,
    #[serde(rename = "M")]
    pub radius: f64,
    /// Keeps δ fixed instead of retuning it to each `n`.
    pub fixed_delta: Option<f64>,
    pub pattern_cap: usize,
}

impl Default for MinimaxSpec {
    fn default() -> Self {
        Self { k: 3, d: 2, radius: 1.0, fixed_delta: None, pattern_cap: vqmargin_core::minimax::PATTERN_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct ErmSpec {
    /// Sample size; defaults to the first entry of `n_grid`.
    pub n: Option<usize>,
    /// Forces partition enumeration instead of multistart Lloyd.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub distribution: Option<DistributionSpec>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Drops the first grid point from slope fits.
    #[serde(default)]
    pub drop_first: bool,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub optimal: OptimalSpec,
    #[serde(default)]
    pub margin: MarginSpec,
    #[serde(default)]
    pub minimax: MinimaxSpec,
    #[serde(default)]
    pub erm: ErmSpec,
    /// Verify suites to run; all when empty.
    #[serde(default)]
    pub suites: Vec<String>,
}

fn default_reps() -> usize {
    1
}

fn default_restarts() -> usize {
    10
}

fn default_n_mc() -> usize {
    200_000
}

impl ExperimentConfig {
    /// A configuration with every optional field at its default.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            distribution: None,
            k: None,
            n_grid: Vec::new(),
            reps: default_reps(),
            restarts: default_restarts(),
            n_mc: default_n_mc(),
            master_seed: 0,
            drop_first: false,
            output: OutputPaths::default(),
            optimal: OptimalSpec::default(),
            margin: MarginSpec::default(),
            minimax: MinimaxSpec::default(),
            erm: ErmSpec::default(),
            suites: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid experiment configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            bail!("n_grid must be strictly increasing");
        }
        if self.n_grid.contains(&0) {
            bail!("n_grid entries must be positive");
        }
        if self.reps == 0 {
            bail!("reps must be at least 1");
        }
        if self.restarts == 0 {
            bail!("restarts must be at least 1");
        }
        Ok(())
    }

    pub fn distribution_spec(&self) -> Result<&DistributionSpec> {
        self.distribution.as_ref().with_context(|| format!("`{}` needs a `distribution`", self.command.as_str()))
    }

    /// `k` from the config, or from an adversarial distribution spec.
    pub fn k(&self) -> Result<usize> {
        if let Some(k) = self.k {
            return Ok(k);
        }
        match &self.distribution {
            Some(DistributionSpec::Adversarial { k, .. }) => Ok(*k),
            _ => bail!("`{}` needs `k`", self.command.as_str()),
        }
    }

    pub fn require_grid(&self) -> Result<&[usize]> {
        if self.n_grid.is_empty() {
            bail!("`{}` needs a nonempty `n_grid`", self.command.as_str());
        }
        Ok(&self.n_grid)
    }
}
