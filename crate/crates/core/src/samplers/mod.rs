//! Transition kernels.
//!
//! Every kernel implements [`Kernel`] and is constructed by name through the
//! [`KernelRegistry`], so experiments and the CLI can select samplers from
//! configuration. The free functions ([`simplicial_step`], [`rwm_step`],
//! [`mtm_step`], …) carry out a single transition with fixed tuning; the
//! kernel types wrap them with per-chain adaptation.

pub mod adaptation;
mod mtm;
mod registry;
mod rwm;
mod simplicial;
pub mod slice;

pub use adaptation::AdaptationState;
pub use mtm::{mtm_step, MtmKernel};
pub use registry::{default_walk_scale, KernelFactory, KernelRegistry, KernelSpec, DEFAULT_EDGE_LENGTH};
pub use rwm::{rwm_step, RwmKernel};
pub use simplicial::{
    extra_dimensional_step, propose_simplex, simplicial_step, unrotated_projection, EdgeScaling,
    SimplicialConfig, SimplicialKernel,
};
pub use slice::{slice_step_univariate, SliceSampler};

use rand::Rng;

use crate::error::{Error, Result};
use crate::targets::Target;
use crate::ChainRng;

/// Current position of a chain with its log density cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    position: Vec<f64>,
    log_density: f64,
    iteration: u64,
}

impl ChainState {
    /// Evaluates `target` at `position`; the density must be finite.
    pub fn new(target: &dyn Target, position: Vec<f64>) -> Result<Self> {
        if position.len() != target.dim() {
            return Err(Error::InvalidStart(format!(
                "initial position has dimension {}, target has {}",
                position.len(),
                target.dim()
            )));
        }
        let log_density = target.log_density(&position)?;
        if !log_density.is_finite() {
            return Err(Error::InvalidStart(format!(
                "target log density at the initial position is {log_density}"
            )));
        }
        Ok(Self {
            position,
            log_density,
            iteration: 0,
        })
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn log_density(&self) -> f64 {
        self.log_density
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    fn advance(&self, position: Vec<f64>, log_density: f64) -> Self {
        Self {
            position,
            log_density,
            iteration: self.iteration + 1,
        }
    }

    fn stay(&self) -> Self {
        Self {
            iteration: self.iteration + 1,
            ..self.clone()
        }
    }

    /// Re-evaluates the cached density, e.g. after the target's auxiliary
    /// parameters changed.
    pub fn refresh(&mut self, target: &dyn Target) -> Result<()> {
        self.log_density = target.log_density(&self.position)?;
        Ok(())
    }
}

/// Result of one kernel application.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: ChainState,
    /// Index of the chosen candidate; the last index is the current state.
    pub selected: usize,
    /// `true` when the chain moved.
    pub accepted: bool,
}

/// A Markov transition kernel with chain-local tuning state.
pub trait Kernel: Send {
    fn name(&self) -> &str;

    /// Called once before a run of `n_iterations`.
    fn prepare(&mut self, _dim: usize, _n_iterations: usize) -> Result<()> {
        Ok(())
    }

    fn step(&mut self, state: &ChainState, target: &dyn Target, rng: &mut ChainRng) -> Result<Transition>;

    /// Current scale parameter: edge length for simplicial kernels, proposal
    /// standard deviation for random-walk kernels.
    fn tuning(&self) -> f64;

    /// Number of new target evaluations per step.
    fn evaluations_per_step(&self) -> usize;
}

/// Normalized selection probabilities `exp(ℓ_p − logsumexp ℓ)`.
pub fn selection_probabilities(log_densities: &[f64]) -> Result<Vec<f64>> {
    let max = max_finite(log_densities)?;
    let weights: Vec<f64> = log_densities.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Draws index `p` with probability proportional to `exp(log_densities[p])`.
pub fn select_index<R: Rng + ?Sized>(log_densities: &[f64], rng: &mut R) -> Result<usize> {
    let max = max_finite(log_densities)?;
    let mut weights = Vec::with_capacity(log_densities.len());
    let mut total = 0.0;
    for l in log_densities {
        let w = (l - max).exp();
        total += w;
        weights.push(w);
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

fn max_finite(log_densities: &[f64]) -> Result<f64> {
    if log_densities.iter().any(|l| l.is_nan()) {
        return Err(Error::invalid("log density is NaN"));
    }
    let max = log_densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ImpossibleState);
    }
    if max == f64::INFINITY {
        return Err(Error::invalid("log density is +inf"));
    }
    Ok(max)
}

/// `log Σ exp(values)`, max-shifted; `-inf` when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
