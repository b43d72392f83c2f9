use rand::Rng;

use super::rwm::{check_scale, gaussian_proposal};
use super::{log_sum_exp, select_index, AdaptationState, ChainState, Kernel, Transition};
use crate::error::{Error, Result};
use crate::geometry::PreconditionRoot;
use crate::targets::Target;
use crate::ChainRng;

/// One multiple-try Metropolis step with weights `w(y|x) = π(y)`.
///
/// Draws `n_tries` Gaussian proposals, picks `y` in proportion to density,
/// draws `n_tries − 1` reference points around `y` and uses the current
/// state as the last one. `selected` is the index of `y` when the chain
/// moves and `n_tries` otherwise.
pub fn mtm_step(
    state: &ChainState,
    target: &dyn Target,
    n_tries: usize,
    scale: f64,
    root: Option<&PreconditionRoot>,
    rng: &mut ChainRng,
) -> Result<Transition> {
    if n_tries == 0 {
        return Err(Error::invalid("multiple-try Metropolis needs at least one try"));
    }
    check_scale(scale, target.dim(), state, root)?;
    let mut tries = Vec::with_capacity(n_tries);
    let mut try_densities = Vec::with_capacity(n_tries);
    for _ in 0..n_tries {
        let y = gaussian_proposal(state.position(), scale, root, rng);
        try_densities.push(target.log_density(&y)?);
        tries.push(y);
    }
    // A single try needs no selection draw, which keeps the random stream
    // aligned with random-walk Metropolis.
    let chosen = if n_tries == 1 {
        0
    } else if try_densities.iter().all(|l| *l == f64::NEG_INFINITY) {
        let _: f64 = rng.random();
        return Ok(Transition {
            state: state.stay(),
            selected: n_tries,
            accepted: false,
        });
    } else {
        select_index(&try_densities, rng)?
    };

    let mut reference_densities = Vec::with_capacity(n_tries);
    for _ in 1..n_tries {
        let x = gaussian_proposal(&tries[chosen], scale, root, rng);
        reference_densities.push(target.log_density(&x)?);
    }
    reference_densities.push(state.log_density());

    let log_ratio = log_sum_exp(&try_densities) - log_sum_exp(&reference_densities);
    let u: f64 = rng.random();
    if u.ln() < log_ratio {
        let log_density = try_densities[chosen];
        Ok(Transition {
            state: state.advance(tries.swap_remove(chosen), log_density),
            selected: chosen,
            accepted: true,
        })
    } else {
        Ok(Transition {
            state: state.stay(),
            selected: n_tries,
            accepted: false,
        })
    }
}

/// Multiple-try Metropolis with optional scale and covariance adaptation.
#[derive(Debug, Clone)]
pub struct MtmKernel {
    name: String,
    n_tries: usize,
    adaptation: AdaptationState,
    freeze_fraction: f64,
}

impl MtmKernel {
    pub fn new(name: impl Into<String>, n_tries: usize, adaptation: AdaptationState) -> Result<Self> {
        if n_tries == 0 {
            return Err(Error::invalid("multiple-try Metropolis needs at least one try"));
        }
        Ok(Self {
            name: name.into(),
            n_tries,
            adaptation,
            freeze_fraction: 0.5,
        })
    }

    pub fn with_freeze_fraction(mut self, fraction: f64) -> Self {
        self.freeze_fraction = fraction;
        self
    }

    pub fn n_tries(&self) -> usize {
        self.n_tries
    }

    pub fn adaptation(&self) -> &AdaptationState {
        &self.adaptation
    }
}

impl Kernel for MtmKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn prepare(&mut self, _dim: usize, n_iterations: usize) -> Result<()> {
        let freeze = (n_iterations as f64 * self.freeze_fraction).ceil() as u64;
        self.adaptation.freeze_covariance_after(freeze);
        Ok(())
    }

    fn step(&mut self, state: &ChainState, target: &dyn Target, rng: &mut ChainRng) -> Result<Transition> {
        let transition = mtm_step(
            state,
            target,
            self.n_tries,
            self.adaptation.scale(),
            self.adaptation.root(),
            rng,
        )?;
        self.adaptation.adapt_edge_length(transition.accepted);
        self.adaptation.adapt_covariance(transition.state.position())?;
        Ok(transition)
    }

    fn tuning(&self) -> f64 {
        self.adaptation.scale()
    }

    fn evaluations_per_step(&self) -> usize {
        2 * self.n_tries - 1
    }
}
