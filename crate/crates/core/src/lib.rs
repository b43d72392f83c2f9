//! Simplicial samplers and the machinery around them.
//!
//! The simplicial sampler is a multiproposal MCMC kernel: each iteration
//! rotates a regular simplex with one vertex pinned at the current state by a
//! Haar-distributed orthogonal matrix and moves to one of its vertices with
//! probability proportional to target density. Because the rotated simplex
//! is equally likely to have been generated from any of its vertices, no
//! proposal-density correction is needed.
//!
//! - [`geometry`]: regular simplices, Haar rotations, the simplex maps.
//! - [`targets`]: log-density evaluators, including GP classification.
//! - [`samplers`]: simplicial variants, RWM, MTM, slice sampling, adaptation,
//!   and the name-keyed [`samplers::KernelRegistry`].
//! - [`chain`]: the chain-running loop and [`chain::ChainTrace`].
//! - [`diagnostics`]: ESS, acceptance, intermodal jumps, QQ data.

pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod samplers;
pub mod targets;

pub use error::{Error, Result};

/// Random source used by every chain. Seeded per replicate for exact reruns.
pub type ChainRng = rand_chacha::ChaCha8Rng;

/// Creates the chain random source for `seed`.
pub fn chain_rng(seed: u64) -> ChainRng {
    <ChainRng as rand::SeedableRng>::seed_from_u64(seed)
}
