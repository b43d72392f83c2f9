//! Shared machinery: building targets, starting chains, running replicate
//! jobs on a worker pool and turning traces into records.

use std::collections::BTreeMap;

use rayon::prelude::*;
use simplicial::chain::{run_chain, ChainTrace};
use simplicial::diagnostics::{acceptance_rate, effective_sample_size, EssReport};
use simplicial::samplers::{KernelRegistry, KernelSpec};
use simplicial::targets::{ElectionData, GaussianSpec, GpClassificationModel, GpHyper, MixtureSpec, Target};
use simplicial::{chain_rng, ChainRng};

use crate::config::{ExperimentConfig, Initialization, TargetConfig};
use crate::error::{HarnessError, Result};
use crate::results::ReplicateRecord;

/// Everything an experiment needs to run.
pub struct RunContext {
    /// Configuration after `--quick` / `--seed` adjustments.
    pub config: ExperimentConfig,
    pub quick: bool,
    pub threads: usize,
    pub kernels: KernelRegistry,
}

impl RunContext {
    pub fn new(config: ExperimentConfig, quick: bool, threads: usize) -> Self {
        Self {
            config,
            quick,
            threads: threads.max(1),
            kernels: KernelRegistry::builtin(),
        }
    }

    /// Maps `f` over `items` on the worker pool. Output order follows
    /// `items` regardless of scheduling.
    pub fn parallel_map<T, U, F>(&self, items: &[T], f: F) -> Result<Vec<U>>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Result<U> + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| HarnessError::Runtime(format!("cannot start worker pool: {e}")))?;
        pool.install(|| items.par_iter().map(&f).collect())
    }
}

/// A target instance owned by one chain.
#[derive(Debug, Clone)]
pub enum PreparedTarget {
    Gaussian(GaussianSpec),
    Mixture(MixtureSpec),
    Gp(Box<GpClassificationModel>),
}

impl PreparedTarget {
    pub fn build(cfg: &TargetConfig, dim: usize, data: Option<&ElectionData>) -> Result<Self> {
        Ok(match cfg {
            TargetConfig::Spherical { variance } => {
                PreparedTarget::Gaussian(GaussianSpec::spherical(vec![0.0; dim], *variance)?)
            }
            TargetConfig::IllConditionedDiagonal => {
                PreparedTarget::Gaussian(GaussianSpec::ill_conditioned_diagonal(dim)?)
            }
            TargetConfig::IllConditionedFull { rotation_seed } => {
                let mut rng = chain_rng(*rotation_seed);
                PreparedTarget::Gaussian(GaussianSpec::ill_conditioned_full(dim, &mut rng)?)
            }
            TargetConfig::Bimodal { separation } => PreparedTarget::Mixture(MixtureSpec::bimodal(dim, *separation)?),
            TargetConfig::GpElection => {
                let data = data.ok_or_else(|| HarnessError::Config("GP target without a dataset".into()))?;
                PreparedTarget::Gp(Box::new(GpClassificationModel::from_data(data, GpHyper::default())?))
            }
        })
    }

    pub fn as_target_mut(&mut self) -> &mut dyn Target {
        match self {
            PreparedTarget::Gaussian(g) => g,
            PreparedTarget::Mixture(m) => m,
            PreparedTarget::Gp(m) => m.as_mut(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PreparedTarget::Gaussian(g) => g.dim(),
            PreparedTarget::Mixture(m) => m.dim(),
            PreparedTarget::Gp(m) => m.n(),
        }
    }

    /// Starting point for a chain. Uses its own random stream so the chain's
    /// stream is unaffected.
    pub fn initial_position(&self, init: Initialization, seed: u64) -> Result<Vec<f64>> {
        let mut rng: ChainRng = chain_rng(seed);
        rng.set_stream(1);
        match (init, self) {
            (Initialization::Origin, _) => Ok(vec![0.0; self.dim()]),
            (Initialization::TargetDraw, PreparedTarget::Gaussian(g)) => Ok(g.sample(&mut rng)),
            (Initialization::TargetDraw, PreparedTarget::Mixture(m)) => Ok(m.sample(&mut rng)),
            (Initialization::Misclassify, PreparedTarget::Gp(m)) => {
                Ok(m.labels().iter().map(|&y| if y == 1.0 { -1.0 } else { 1.0 }).collect())
            }
            (init, _) => Err(HarnessError::Config(format!(
                "initialization {init:?} is not available for this target"
            ))),
        }
    }
}

/// ESS that treats a chain which never moved as having no information.
pub fn ess_or_zero(series: &[f64]) -> Result<f64> {
    match effective_sample_size(series) {
        Ok(v) => Ok(v),
        Err(simplicial::Error::UndefinedEss(_)) => {
            log::warn!("constant series; ESS reported as 0");
            Ok(0.0)
        }
        Err(e) => Err(e.into()),
    }
}

/// One chain to run.
#[derive(Debug, Clone)]
pub struct ChainJob {
    pub case: usize,
    pub experiment: String,
    pub spec: KernelSpec,
    pub dimension: usize,
    pub replicate: usize,
    pub seed: u64,
    /// Values of the experiment's group columns for this chain.
    pub group: BTreeMap<String, f64>,
}

/// Runs `job` on `target` and returns the trace.
pub fn run_job(ctx: &RunContext, job: &ChainJob, target: &mut PreparedTarget) -> Result<ChainTrace> {
    let cfg = &ctx.config;
    let mut kernel = ctx
        .kernels
        .build(&job.spec, target.dim())
        .map_err(|e| HarnessError::Config(format!("sampler `{}`: {e}", job.spec.display_name())))?;
    let initial = target.initial_position(cfg.initialization, job.seed)?;
    let trace = run_chain(kernel.as_mut(), target.as_target_mut(), cfg.iterations, initial, job.seed)?;
    Ok(trace)
}

/// Common statistics of a finished chain. Timing-derived fields are `None`
/// when timing is off.
pub fn base_record(ctx: &RunContext, job: &ChainJob, trace: &ChainTrace) -> Result<ReplicateRecord> {
    let cfg = &ctx.config;
    let burn = trace.burn_in_index(cfg.burn_in_fraction);
    let per_coordinate = (0..trace.dim())
        .map(|j| ess_or_zero(&trace.coordinate(j, burn)))
        .collect::<Result<Vec<_>>>()?;
    let wall = cfg.timing.then(|| trace.wall_time_seconds());
    let ess = EssReport::from_values(per_coordinate, wall)?;
    let mut extra: BTreeMap<String, Option<f64>> = job.group.iter().map(|(k, v)| (k.clone(), Some(*v))).collect();
    extra.insert("final_scale".into(), Some(trace.final_tuning()));
    Ok(ReplicateRecord {
        experiment: job.experiment.clone(),
        algorithm: job.spec.display_name().to_string(),
        dimension: trace.dim(),
        replicate: job.replicate,
        seed: job.seed,
        iterations: trace.n_iterations(),
        mean_ess: ess.mean_ess,
        min_ess: ess.min_ess,
        mean_esss: ess.mean_esss,
        min_esss: ess.min_esss,
        acceptance_rate: acceptance_rate(trace)?,
        wall_seconds: wall,
        extra,
    })
}

/// Cartesian product of cases, samplers, dimensions and replicates.
pub fn standard_jobs(cfg: &ExperimentConfig) -> Vec<ChainJob> {
    let mut jobs = Vec::new();
    for (ci, case) in cfg.cases.iter().enumerate() {
        for spec in &case.samplers {
            for &d in cfg.dimensions_for(case) {
                for r in 0..cfg.replicates {
                    jobs.push(ChainJob {
                        case: ci,
                        experiment: format!("{}/{}", cfg.experiment, case.label),
                        spec: spec.clone(),
                        dimension: d,
                        replicate: r,
                        seed: cfg.replicate_seed(r),
                        group: BTreeMap::new(),
                    });
                }
            }
        }
    }
    jobs
}
