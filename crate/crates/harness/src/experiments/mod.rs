//! Experiments, registered by name.

mod bimodal;
mod comparison;
mod extra_dimensional;
mod gp;
mod scaling;

use std::collections::BTreeMap;

pub use bimodal::BimodalStudy;
pub use comparison::GaussianComparison;
pub use extra_dimensional::ExtraDimensionalDemo;
pub use gp::GpBenchmark;
pub use scaling::ScalingSweep;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::results::{aggregate, Artifact, ExperimentOutput, ExperimentResult, ReplicateRecord, SCHEMA_VERSION};
use crate::runner::RunContext;

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Experiment-specific checks on top of [`ExperimentConfig::validate`].
    fn validate(&self, _config: &ExperimentConfig) -> Result<()> {
        Ok(())
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput>;
}

pub struct ExperimentRegistry {
    experiments: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self {
            experiments: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ScalingSweep));
        r.register(Box::new(GaussianComparison));
        r.register(Box::new(BimodalStudy));
        r.register(Box::new(GpBenchmark));
        r.register(Box::new(ExtraDimensionalDemo));
        r
    }

    pub fn register(&mut self, experiment: Box<dyn Experiment>) {
        self.experiments.insert(experiment.name(), experiment);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.experiments.get(name).map(|e| e.as_ref()).ok_or_else(|| {
            HarnessError::Config(format!(
                "unknown experiment `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.experiments.keys().copied().collect()
    }

    /// Full validation: shared checks, then the experiment's own.
    pub fn validate(&self, ctx: &RunContext) -> Result<&dyn Experiment> {
        let e = self.get(&ctx.config.experiment)?;
        ctx.config.validate(&ctx.kernels)?;
        e.validate(&ctx.config)?;
        Ok(e)
    }

    pub fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput> {
        self.validate(ctx)?.run(ctx)
    }
}

/// Assembles the result envelope shared by every experiment.
pub(crate) fn finish(
    ctx: &RunContext,
    extra_columns: &[&str],
    group_columns: &[&str],
    records: Vec<ReplicateRecord>,
    summary: serde_json::Value,
    artifacts: Vec<Artifact>,
) -> Result<ExperimentOutput> {
    if records.is_empty() {
        return Err(HarnessError::Runtime("experiment produced no replicate records".into()));
    }
    let extra_columns: Vec<String> = extra_columns.iter().map(|s| s.to_string()).collect();
    let group_columns: Vec<String> = group_columns.iter().map(|s| s.to_string()).collect();
    let aggregates = aggregate(&records, &extra_columns, &group_columns);
    Ok(ExperimentOutput {
        result: ExperimentResult {
            schema_version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: ctx.config.experiment.clone(),
            name: ctx.config.name().to_string(),
            quick: ctx.quick,
            config: ctx.config.clone(),
            extra_columns,
            group_columns,
            records,
            aggregates,
            summary,
            artifact_files: artifacts.iter().map(|a| a.file_name.clone()).collect(),
        },
        artifacts,
    })
}

/// Replicate-matched ratios `subject / baseline` of a metric.
pub(crate) fn paired_ratios(
    records: &[ReplicateRecord],
    experiment: &str,
    dimension: usize,
    subject: &str,
    baseline: &str,
    metric: &str,
) -> Vec<f64> {
    let pick = |alg: &str| -> BTreeMap<usize, f64> {
        records
            .iter()
            .filter(|r| r.experiment == experiment && r.dimension == dimension && r.algorithm == alg)
            .filter_map(|r| r.value(metric).map(|v| (r.replicate, v)))
            .collect()
    };
    let (s, b) = (pick(subject), pick(baseline));
    s.iter()
        .filter_map(|(rep, v)| b.get(rep).filter(|bv| **bv > 0.0).map(|bv| v / bv))
        .collect()
}
