//! Running a kernel for a fixed number of iterations.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::samplers::{ChainState, Kernel};
use crate::targets::Target;
use crate::chain_rng;

/// Everything recorded from one chain.
///
/// States are stored row-major, `n_iterations + 1` rows of `dim` values, the
/// first row being the initial position. The per-iteration lists
/// (`selected`, `accepted`) have `n_iterations` entries each.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    dim: usize,
    states: Vec<f64>,
    selected: Vec<usize>,
    accepted: Vec<bool>,
    auxiliary_names: Vec<String>,
    // Row-major, one row per state.
    auxiliary: Vec<f64>,
    wall_time_seconds: f64,
    rng_seed: u64,
    kernel_name: String,
    final_tuning: f64,
}

impl ChainTrace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_iterations(&self) -> usize {
        self.selected.len()
    }

    /// Number of recorded states, `n_iterations + 1`.
    pub fn n_states(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.n_states() - 1)
    }

    /// Values of coordinate `j` over states `from..`.
    pub fn coordinate(&self, j: usize, from: usize) -> Vec<f64> {
        self.states().skip(from).map(|s| s[j]).collect()
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    pub fn auxiliary_names(&self) -> &[String] {
        &self.auxiliary_names
    }

    /// Values of auxiliary parameter `k` over states `from..`.
    pub fn auxiliary(&self, k: usize, from: usize) -> Vec<f64> {
        let width = self.auxiliary_names.len();
        self.auxiliary
            .chunks_exact(width.max(1))
            .skip(from)
            .map(|row| row[k])
            .collect()
    }

    pub fn wall_time_seconds(&self) -> f64 {
        self.wall_time_seconds
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn kernel_name(&self) -> &str {
        &self.kernel_name
    }

    /// Scale parameter of the kernel at the end of the run.
    pub fn final_tuning(&self) -> f64 {
        self.final_tuning
    }

    /// Index of the first state kept after discarding `fraction` of the
    /// iterations.
    pub fn burn_in_index(&self, fraction: f64) -> usize {
        ((self.n_iterations() as f64) * fraction.clamp(0.0, 1.0)).floor() as usize
    }
}

/// Runs `kernel` on `target` from `initial` for `n_iterations` steps.
///
/// After every kernel step the target gets a chance to update its auxiliary
/// parameters (the GP hyperparameter sweep); the cached density is then
/// recomputed. Deterministic given `seed`. The wall time covers the
/// iteration loop only.
pub fn run_chain(
    kernel: &mut dyn Kernel,
    target: &mut dyn Target,
    n_iterations: usize,
    initial: Vec<f64>,
    seed: u64,
) -> Result<ChainTrace> {
    let dim = target.dim();
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    kernel.prepare(dim, n_iterations)?;
    let mut state = ChainState::new(&*target, initial)?;
    let mut rng = chain_rng(seed);
    let auxiliary_names: Vec<String> = target.auxiliary_names().iter().map(|s| s.to_string()).collect();

    let mut states = Vec::with_capacity((n_iterations + 1) * dim);
    let mut auxiliary = Vec::with_capacity((n_iterations + 1) * auxiliary_names.len());
    let mut selected = Vec::with_capacity(n_iterations);
    let mut accepted = Vec::with_capacity(n_iterations);
    states.extend_from_slice(state.position());
    auxiliary.extend(target.auxiliary_values());

    let start = Instant::now();
    for _ in 0..n_iterations {
        let t = kernel.step(&state, &*target, &mut rng)?;
        state = t.state;
        if target.update_auxiliary(state.position(), &mut rng)? {
            state.refresh(&*target)?;
            if !state.log_density().is_finite() {
                return Err(Error::invalid(format!(
                    "log density became {} after the auxiliary update",
                    state.log_density()
                )));
            }
        }
        selected.push(t.selected);
        accepted.push(t.accepted);
        states.extend_from_slice(state.position());
        auxiliary.extend(target.auxiliary_values());
    }
    let wall_time_seconds = start.elapsed().as_secs_f64();

    Ok(ChainTrace {
        dim,
        states,
        selected,
        accepted,
        auxiliary_names,
        auxiliary,
        wall_time_seconds,
        rng_seed: seed,
        kernel_name: kernel.name().to_string(),
        final_tuning: kernel.tuning(),
    })
}
