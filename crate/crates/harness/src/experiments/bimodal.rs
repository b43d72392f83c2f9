use serde_json::json;
use simplicial::diagnostics::{intermodal_jumps, median};

use super::{finish, Experiment};
use crate::config::{ExperimentConfig, TargetConfig};
use crate::error::{HarnessError, Result};
use crate::results::ExperimentOutput;
use crate::runner::{base_record, run_job, standard_jobs, PreparedTarget, RunContext};

/// Intermodal jump counts on two-component Gaussian mixtures.
pub struct BimodalStudy;

impl Experiment for BimodalStudy {
    fn name(&self) -> &'static str {
        "bimodal_study"
    }

    fn description(&self) -> &'static str {
        "intermodal jumps of each sampler on equal-weight two-mode Gaussian mixtures"
    }

    fn validate(&self, config: &ExperimentConfig) -> Result<()> {
        if config.cases.is_empty() {
            return Err(HarnessError::Config("bimodal_study needs at least one case".into()));
        }
        if config.cases.iter().any(|c| !matches!(c.target, TargetConfig::Bimodal { .. })) {
            return Err(HarnessError::Config("bimodal_study cases must use bimodal targets".into()));
        }
        Ok(())
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput> {
        let cfg = &ctx.config;
        let jobs = standard_jobs(cfg);
        let records = ctx.parallel_map(&jobs, |job| {
            let mut target = PreparedTarget::build(&cfg.cases[job.case].target, job.dimension, None)?;
            let PreparedTarget::Mixture(mixture) = &target else {
                unreachable!("validated bimodal target")
            };
            let centers = mixture.centers();
            let trace = run_job(ctx, job, &mut target)?;
            let mut rec = base_record(ctx, job, &trace)?;
            let jumps = intermodal_jumps(trace.states(), &centers)?;
            rec.extra.insert("intermodal_jumps".into(), Some(jumps as f64));
            Ok(rec)
        })?;

        let mut medians = Vec::new();
        for case in &cfg.cases {
            let experiment = format!("{}/{}", cfg.experiment, case.label);
            for &d in cfg.dimensions_for(case) {
                for s in &case.samplers {
                    let jumps: Vec<f64> = records
                        .iter()
                        .filter(|r| r.experiment == experiment && r.dimension == d && r.algorithm == s.display_name())
                        .filter_map(|r| r.value("intermodal_jumps"))
                        .collect();
                    medians.push(json!({
                        "experiment": experiment,
                        "dimension": d,
                        "algorithm": s.display_name(),
                        "median_jumps": median(&jumps).ok(),
                        "jumps": jumps,
                    }));
                }
            }
        }
        finish(ctx, &["intermodal_jumps"], &[], records, json!({ "jumps": medians }), Vec::new())
    }
}
