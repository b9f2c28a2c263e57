//! Experiment configuration: a plain serde struct so the CLI can load it
//! from a key-value (TOML) file and override single fields from flags.

use serde::{Deserialize, Serialize};

use crate::covariance::{ChaosOrder, CovarianceModel};
use crate::error::{Error, Result};
use crate::hermite::{Regime, VariationSpec};

/// Which covariance model an experiment runs on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Fgn {
        hurst: f64,
    },
    White,
    Explicit {
        values: Vec<f64>,
        #[serde(default)]
        tail_exponent: Option<f64>,
        #[serde(default)]
        zero_fill: bool,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<CovarianceModel> {
        match self {
            ModelConfig::Fgn { hurst } => CovarianceModel::fgn(*hurst),
            ModelConfig::White => Ok(CovarianceModel::WhiteNoise),
            ModelConfig::Explicit { values, tail_exponent, zero_fill } => {
                CovarianceModel::explicit(values.clone(), *tail_exponent, *zero_fill)
            }
        }
    }
}

/// Normalizer regime, in config-file spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeConfig {
    Exact,
    BreuerMajor,
    Critical,
}

impl From<RegimeConfig> for Regime {
    fn from(r: RegimeConfig) -> Self {
        match r {
            RegimeConfig::Exact => Regime::Exact,
            RegimeConfig::BreuerMajor => Regime::BreuerMajor,
            RegimeConfig::Critical => Regime::Critical,
        }
    }
}

/// Blocking-subsequence parameters for the cross-covariance and comparison
/// audits.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockingConfig {
    pub q_ratio: f64,
    pub alpha: f64,
    /// Offset used by the comparison check.
    pub m: u32,
    /// Offset range swept by the cross-covariance audit.
    pub m_min: u32,
    pub m_max: u32,
    pub d: usize,
}

impl Default for BlockingConfig {
    fn default() -> Self {
        Self { q_ratio: 1.2, alpha: 0.3, m: 6, m_min: 4, m_max: 8, d: 3 }
    }
}

/// Grid and replicate counts of the running-record trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub n_max: u64,
    pub grid_ratio: f64,
    pub replicates: u64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { n_max: 1 << 16, grid_ratio: 2.0, replicates: 8 }
    }
}

/// Audit thresholds. Constants in the decay bounds are fitted from the data
/// and additionally checked against these caps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Cap on `|ratio - 1| ln n` in the variance-law audit.
    pub variance_c: f64,
    /// Fitted constants must stay within this factor across scales.
    pub stability_factor: f64,
    /// Monte-Carlo inequality checks get this many standard errors of slack.
    pub mc_sigmas: f64,
    /// Extra absolute slack of the comparison-inequality check.
    pub comparison_slack: f64,
    /// Tail tolerance of the Breuer--Major series constant.
    pub sigma_tol: f64,
    /// Theta grid of the moment-decay audit.
    pub moment_thetas: Vec<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            variance_c: 4.0,
            stability_factor: 3.0,
            mc_sigmas: 4.0,
            comparison_slack: 0.15,
            sigma_tol: 1e-8,
            moment_thetas: vec![2.0, 4.0, 6.0],
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub q: u32,
    pub regime: RegimeConfig,
    pub seed: u64,
    /// Monte-Carlo ensemble size.
    pub ensemble: u64,
    /// Scales of the exact variance-law audit.
    pub n_grid: Vec<u64>,
    /// Scales of the Monte-Carlo distance-decay audit.
    pub distance_n_grid: Vec<u64>,
    /// Sample-vector count of the comparison-inequality check.
    pub comparison_points: usize,
    /// Path length of the `simulate` dump.
    pub path_length: u64,
    pub blocking: BlockingConfig,
    pub trajectory: TrajectoryConfig,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::Fgn { hurst: 0.75 },
            q: 2,
            regime: RegimeConfig::Critical,
            seed: 42,
            ensemble: 2000,
            n_grid: (10..=22).map(|p| 1u64 << p).collect(),
            distance_n_grid: vec![1 << 8, 1 << 11, 1 << 14],
            comparison_points: 256,
            path_length: 64,
            blocking: BlockingConfig::default(),
            trajectory: TrajectoryConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn chaos_order(&self) -> Result<ChaosOrder> {
        ChaosOrder::new(self.q)
    }

    pub fn variation_spec(&self) -> Result<VariationSpec> {
        VariationSpec::new(self.model.build()?, self.chaos_order()?, self.regime.into())
    }

    /// Spec with the exact normalizer regardless of the configured regime;
    /// Monte-Carlo audits default to it so asymptotic-constant error never
    /// confounds a decay measurement.
    pub fn exact_spec(&self) -> Result<VariationSpec> {
        VariationSpec::new(self.model.build()?, self.chaos_order()?, Regime::Exact)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble < 1 {
            return Err(Error::Config("ensemble size must be >= 1".into()));
        }
        if self.n_grid.is_empty() || self.distance_n_grid.is_empty() {
            return Err(Error::Config("scale grids must be nonempty".into()));
        }
        if self.blocking.m_min > self.blocking.m_max {
            return Err(Error::Config("blocking m_min must be <= m_max".into()));
        }
        self.chaos_order()?;
        self.model.build()?;
        Ok(())
    }
}
