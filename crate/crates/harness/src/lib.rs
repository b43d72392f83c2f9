//! Declarative experiments for the simplicial sampler library: configuration,
//! parallel replicate execution and persisted results.

pub mod config;
pub mod error;
pub mod experiments;
pub mod results;
pub mod runner;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiments::{Experiment, ExperimentRegistry};
pub use results::{read_results, write_results, ExperimentOutput, ExperimentResult};
pub use runner::RunContext;

/// Options of a single `run` invocation.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub quick: bool,
    pub threads: usize,
    pub seed: Option<u64>,
    pub force: bool,
    pub timing: Option<bool>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            quick: false,
            threads: 1,
            seed: None,
            force: false,
            timing: None,
        }
    }
}

/// Applies the run options to a loaded config.
pub fn prepare_config(config: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut cfg = if opts.quick { config.quick() } else { config.clone() };
    if let Some(seed) = opts.seed {
        cfg.base_seed = seed;
    }
    if let Some(timing) = opts.timing {
        cfg.timing = timing;
    }
    cfg
}

/// Validates, runs and persists one experiment. Returns the written files.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions, output: &Path) -> Result<Vec<PathBuf>> {
    let cfg = prepare_config(config, opts);
    let registry = ExperimentRegistry::builtin();
    let ctx = RunContext::new(cfg, opts.quick, opts.threads);
    registry.validate(&ctx)?;
    // Refuse before spending time on chains.
    results::ensure_outputs_free(output, ctx.config.name(), opts.force)?;
    let out = registry.run(&ctx)?;
    write_results(&out, output, opts.force)
}
