//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simplicial::samplers::{KernelRegistry, KernelSpec};

use crate::error::{HarnessError, Result};

fn default_burn_in() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

/// One experiment run: which experiment, what to run it on, how long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registered experiment name, e.g. `gaussian_comparison`.
    pub experiment: String,
    /// Output file stem; defaults to the experiment name.
    #[serde(default)]
    pub name: Option<String>,
    pub iterations: usize,
    pub replicates: usize,
    /// Replicate `r` runs with seed `base_seed + r`.
    pub base_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    /// Record wall-clock times. With timing off the per-second columns are
    /// left empty and output files depend only on the config.
    #[serde(default = "default_true")]
    pub timing: bool,
    #[serde(default)]
    pub dimensions: Vec<usize>,
    #[serde(default)]
    pub initialization: Initialization,
    #[serde(default)]
    pub cases: Vec<CaseConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub gp: Option<GpConfig>,
    #[serde(default)]
    pub projection: Option<ProjectionConfig>,
    /// Default output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// How chains are started.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// An exact draw from the target (Gaussian and mixture targets).
    #[default]
    TargetDraw,
    /// The origin.
    Origin,
    /// Latents with the wrong sign for every observation (GP target).
    Misclassify,
}

/// A target paired with the samplers to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub label: String,
    pub target: TargetConfig,
    /// The first sampler is the subject of relative comparisons.
    pub samplers: Vec<KernelSpec>,
    /// Overrides the top-level dimension list.
    #[serde(default)]
    pub dimensions: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// `N(0, variance·I)`.
    Spherical {
        #[serde(default = "one")]
        variance: f64,
    },
    /// `N(0, diag(1, …, D))`.
    IllConditionedDiagonal,
    /// `N(0, Q·diag(1, …, D)·Qᵀ)` with a Haar `Q` drawn from `rotation_seed`.
    IllConditionedFull {
        #[serde(default)]
        rotation_seed: u64,
    },
    /// Equal mixture of `N(0, I)` and `N(separation·1, I)`.
    Bimodal {
        #[serde(default = "five")]
        separation: f64,
    },
    /// GP classification posterior on the election dataset.
    GpElection,
}

fn one() -> f64 {
    1.0
}

fn five() -> f64 {
    5.0
}

/// Scaling sweep: target acceptance grid plus an optional proposal-count
/// study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit rates; if empty, `rate_count` rates evenly spaced over
    /// `[rate_min, rate_max]`.
    #[serde(default)]
    pub target_acceptance_rates: Vec<f64>,
    #[serde(default)]
    pub rate_min: Option<f64>,
    #[serde(default)]
    pub rate_max: Option<f64>,
    #[serde(default)]
    pub rate_count: Option<usize>,
    /// Simplex dimensions for the proposal-count study, as fractions of `D`.
    #[serde(default)]
    pub proposal_fractions: Vec<f64>,
    #[serde(default)]
    pub proposal_dimension: Option<usize>,
    #[serde(default)]
    pub proposal_target_acceptance: Option<f64>,
}

impl SweepConfig {
    pub fn rates(&self) -> Result<Vec<f64>> {
        if !self.target_acceptance_rates.is_empty() {
            return Ok(self.target_acceptance_rates.clone());
        }
        match (self.rate_min, self.rate_max, self.rate_count) {
            (Some(lo), Some(hi), Some(n)) if n >= 2 && lo < hi => {
                Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
            }
            (Some(lo), _, Some(1)) => Ok(vec![lo]),
            _ => Err(HarnessError::Config(
                "sweep needs target_acceptance_rates or rate_min < rate_max with rate_count".into(),
            )),
        }
    }

    /// Simplex dimensions for the proposal study at dimension `d`.
    pub fn proposal_counts(&self, d: usize) -> Vec<usize> {
        let mut p: Vec<usize> = self
            .proposal_fractions
            .iter()
            .map(|f| ((f * d as f64).round() as usize).max(1))
            .collect();
        p.dedup();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpConfig {
    pub dataset: PathBuf,
    /// Misclassification level whose first hitting time is reported.
    #[serde(default = "ten")]
    pub error_threshold: usize,
}

fn ten() -> usize {
    10
}

/// Projection demo: a few extra-dimensional steps from a distant start on a
/// correlated Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionConfig {
    pub proposals: usize,
    pub dimension: usize,
    pub edge_length: f64,
    pub steps: usize,
    pub start: Vec<f64>,
    /// Correlation of the target; variances are 1.
    #[serde(default)]
    pub correlation: f64,
    /// Number of chains for the high-density check.
    pub chains: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        // Relative dataset paths resolve against the config's directory first.
        if let Some(gp) = cfg.gp.as_mut() {
            if gp.dataset.is_relative() && !gp.dataset.exists() {
                if let Some(dir) = path.parent() {
                    let candidate = dir.join(&gp.dataset);
                    if candidate.exists() {
                        gp.dataset = candidate;
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.experiment)
    }

    /// Desk-scale variant: 10% of the iterations and replicates.
    pub fn quick(&self) -> Self {
        let mut c = self.clone();
        c.iterations = (self.iterations / 10).max(100);
        c.replicates = self.replicates.div_ceil(10).max(1);
        if let Some(p) = c.projection.as_mut() {
            p.chains = p.chains.div_ceil(10).max(1);
        }
        c
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }

    pub fn dimensions_for<'a>(&'a self, case: &'a CaseConfig) -> &'a [usize] {
        case.dimensions.as_deref().unwrap_or(&self.dimensions)
    }

    /// Checks everything that can be checked without running a chain.
    pub fn validate(&self, registry: &KernelRegistry) -> Result<()> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.iterations == 0 {
            return err("iterations must be positive".into());
        }
        if self.replicates == 0 {
            return err("replicates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return err(format!("burn_in_fraction must lie in [0, 1), got {}", self.burn_in_fraction));
        }
        let kept = self.iterations + 1 - ((self.iterations as f64) * self.burn_in_fraction).floor() as usize;
        if kept < simplicial::diagnostics::MIN_ESS_LENGTH {
            return err(format!("only {kept} states remain after burn-in"));
        }
        for case in &self.cases {
            if case.samplers.is_empty() {
                return err(format!("case `{}` has no samplers", case.label));
            }
            let dims = self.dimensions_for(case);
            if dims.is_empty() && !matches!(case.target, TargetConfig::GpElection) {
                return err(format!("case `{}` has no dimensions", case.label));
            }
            if dims.contains(&0) {
                return err(format!("case `{}` lists dimension 0", case.label));
            }
            if matches!(case.target, TargetConfig::GpElection) && self.gp.is_none() {
                return err("GP target needs a [gp] section with the dataset path".into());
            }
            let probe_dims: Vec<usize> = if dims.is_empty() {
                vec![simplicial::targets::ELECTION_ROWS]
            } else {
                dims.to_vec()
            };
            for spec in &case.samplers {
                for &d in &probe_dims {
                    registry
                        .build(spec, d)
                        .map_err(|e| HarnessError::Config(format!("case `{}`, sampler `{}`: {e}", case.label, spec.display_name())))?;
                }
            }
        }
        if let Some(s) = &self.sweep {
            for r in s.rates()? {
                if !(r > 0.0 && r < 1.0) {
                    return err(format!("target acceptance rate {r} is outside (0, 1)"));
                }
            }
        }
        if let Some(p) = &self.projection {
            if p.proposals < p.dimension || p.dimension == 0 {
                return err("projection demo needs 0 < dimension <= proposals".into());
            }
            if p.start.len() != p.dimension {
                return err("projection start has the wrong dimension".into());
            }
            if !(p.correlation.abs() < 1.0) {
                return err("projection correlation must lie in (-1, 1)".into());
            }
            if !(p.edge_length > 0.0) || p.chains == 0 {
                return err("projection needs a positive edge length and at least one chain".into());
            }
        }
        Ok(())
    }
}
