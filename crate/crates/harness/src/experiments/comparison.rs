use serde_json::json;
use simplicial::diagnostics::median;

use super::{finish, paired_ratios, Experiment};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::results::ExperimentOutput;
use crate::runner::{base_record, run_job, standard_jobs, PreparedTarget, RunContext};

/// Each case's first sampler against the others on Gaussian targets.
pub struct GaussianComparison;

impl Experiment for GaussianComparison {
    fn name(&self) -> &'static str {
        "gaussian_comparison"
    }

    fn description(&self) -> &'static str {
        "relative ESS and ESS per second of a subject sampler against baselines on Gaussian targets"
    }

    fn validate(&self, config: &ExperimentConfig) -> Result<()> {
        if config.cases.is_empty() {
            return Err(HarnessError::Config("gaussian_comparison needs at least one case".into()));
        }
        Ok(())
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput> {
        let cfg = &ctx.config;
        let jobs = standard_jobs(cfg);
        let records = ctx.parallel_map(&jobs, |job| {
            let mut target = PreparedTarget::build(&cfg.cases[job.case].target, job.dimension, None)?;
            let trace = run_job(ctx, job, &mut target)?;
            base_record(ctx, job, &trace)
        })?;

        let mut comparisons = Vec::new();
        for case in &cfg.cases {
            let experiment = format!("{}/{}", cfg.experiment, case.label);
            let subject = case.samplers[0].display_name();
            for &d in cfg.dimensions_for(case) {
                let acceptance: Vec<_> = case
                    .samplers
                    .iter()
                    .map(|s| {
                        let rates: Vec<f64> = records
                            .iter()
                            .filter(|r| r.experiment == experiment && r.dimension == d && r.algorithm == s.display_name())
                            .map(|r| r.acceptance_rate)
                            .collect();
                        json!({"algorithm": s.display_name(), "median_acceptance_rate": median(&rates).ok()})
                    })
                    .collect();
                let relative: Vec<_> = case.samplers[1..]
                    .iter()
                    .map(|b| {
                        let rel = |metric: &str| {
                            median(&paired_ratios(&records, &experiment, d, subject, b.display_name(), metric)).ok()
                        };
                        json!({
                            "baseline": b.display_name(),
                            "median_relative_mean_ess": rel("mean_ess"),
                            "median_relative_min_ess": rel("min_ess"),
                            "median_relative_mean_esss": rel("mean_esss"),
                            "median_relative_min_esss": rel("min_esss"),
                        })
                    })
                    .collect();
                comparisons.push(json!({
                    "experiment": experiment,
                    "dimension": d,
                    "subject": subject,
                    "acceptance": acceptance,
                    "relative": relative,
                }));
            }
        }
        finish(ctx, &[], &[], records, json!({ "comparisons": comparisons }), Vec::new())
    }
}
