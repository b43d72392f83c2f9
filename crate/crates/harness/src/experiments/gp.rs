use std::collections::BTreeMap;

use serde_json::json;
use simplicial::diagnostics::{first_iteration_below, mean_and_standard_error, misclassification_count};
use simplicial::targets::{load_election_csv, HYPER_NAMES};

use super::{finish, Experiment};
use crate::config::{ExperimentConfig, TargetConfig};
use crate::error::{HarnessError, Result};
use crate::results::{ExperimentOutput, ReplicateRecord};
use crate::runner::{base_record, ess_or_zero, run_job, ChainJob, PreparedTarget, RunContext};

/// GP classification of the election dataset.
pub struct GpBenchmark;

const EXTRA: [&str; 6] = ["ess_eta2", "ess_xi2", "ess_rho2", "ess_sigma2", "its_to_err10", "secs_to_err10"];

impl Experiment for GpBenchmark {
    fn name(&self) -> &'static str {
        "gp_benchmark"
    }

    fn description(&self) -> &'static str {
        "latent and hyperparameter ESS and time to low misclassification for GP classification"
    }

    fn validate(&self, config: &ExperimentConfig) -> Result<()> {
        if config.gp.is_none() {
            return Err(HarnessError::Config("gp_benchmark needs a [gp] section".into()));
        }
        if config.cases.is_empty() || config.cases.iter().any(|c| !matches!(c.target, TargetConfig::GpElection)) {
            return Err(HarnessError::Config("gp_benchmark cases must use the gp_election target".into()));
        }
        Ok(())
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput> {
        let cfg = &ctx.config;
        let gp = cfg.gp.as_ref().expect("validated");
        // Dataset problems abort before any chain starts.
        let data = load_election_csv(&gp.dataset)?;
        let n = data.labels.len();
        let threshold = gp.error_threshold;

        let mut jobs = Vec::new();
        for (ci, case) in cfg.cases.iter().enumerate() {
            for spec in &case.samplers {
                for r in 0..cfg.replicates {
                    jobs.push(ChainJob {
                        case: ci,
                        experiment: format!("{}/{}", cfg.experiment, case.label),
                        spec: spec.clone(),
                        dimension: n,
                        replicate: r,
                        seed: cfg.replicate_seed(r),
                        group: BTreeMap::new(),
                    });
                }
            }
        }

        let records = ctx.parallel_map(&jobs, |job| {
            let mut target = PreparedTarget::build(&cfg.cases[job.case].target, n, Some(&data))?;
            let trace = run_job(ctx, job, &mut target)?;
            let mut rec = base_record(ctx, job, &trace)?;
            let burn = trace.burn_in_index(cfg.burn_in_fraction);
            for (k, name) in HYPER_NAMES.iter().enumerate() {
                rec.extra.insert(format!("ess_{name}"), Some(ess_or_zero(&trace.auxiliary(k, burn))?));
            }
            let errors = trace
                .states()
                .map(|s| misclassification_count(s, &data.labels))
                .collect::<simplicial::Result<Vec<_>>>()?;
            let its = first_iteration_below(&errors, threshold);
            rec.extra.insert("its_to_err10".into(), its.map(|i| i as f64));
            // Prorated from the loop's wall time.
            let secs = rec
                .wall_seconds
                .zip(its)
                .map(|(w, i)| w * i as f64 / trace.n_iterations().max(1) as f64);
            rec.extra.insert("secs_to_err10".into(), secs);
            rec.extra.insert("initial_misclassification".into(), Some(errors[0] as f64));
            Ok(rec)
        })?;

        let summary = summarize(cfg, &records, n);
        finish(ctx, &EXTRA, &[], records, summary, Vec::new())
    }
}

fn summarize(cfg: &ExperimentConfig, records: &[ReplicateRecord], n: usize) -> serde_json::Value {
    let mut algorithms = Vec::new();
    let mut table = BTreeMap::new();
    for case in &cfg.cases {
        let experiment = format!("{}/{}", cfg.experiment, case.label);
        for s in &case.samplers {
            let rs: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.experiment == experiment && r.algorithm == s.display_name())
                .collect();
            let stat = |f: &dyn Fn(&ReplicateRecord) -> Option<f64>| {
                let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
                mean_and_standard_error(&v)
                    .ok()
                    .map(|(m, se)| json!({"mean": m, "standard_error": se, "count": v.len()}))
            };
            // Chains that never reach the threshold count as taking the whole run.
            let censored_its = stat(&|r| Some(r.value("its_to_err10").unwrap_or(r.iterations as f64)));
            let reached = rs.iter().filter(|r| r.value("its_to_err10").is_some()).count();
            let mut hyper = serde_json::Map::new();
            for name in HYPER_NAMES {
                let column = format!("ess_{name}");
                hyper.insert(column.clone(), stat(&|r| r.value(&column)).into());
            }
            let entry = json!({
                "experiment": experiment,
                "algorithm": s.display_name(),
                "mean_ess": stat(&|r| Some(r.mean_ess)),
                "min_ess": stat(&|r| Some(r.min_ess)),
                "mean_esss": stat(&|r| r.mean_esss),
                "min_esss": stat(&|r| r.min_esss),
                "hyper_ess": hyper,
                "its_to_err10_censored": censored_its,
                "secs_to_err10": stat(&|r| r.value("secs_to_err10")),
                "reached_err10": reached,
                "replicates": rs.len(),
                "all_start_fully_misclassified": rs.iter().all(|r| r.value("initial_misclassification") == Some(n as f64)),
            });
            table.insert(s.display_name().to_string(), entry.clone());
            algorithms.push(entry);
        }
    }
    let mean_of = |alg: &str, key: &str| table.get(alg).and_then(|e| e[key]["mean"].as_f64());
    let mut orderings = Vec::new();
    for case in &cfg.cases {
        let subject = case.samplers[0].display_name();
        for b in &case.samplers[1..] {
            let b = b.display_name();
            orderings.push(json!({
                "subject": subject,
                "baseline": b,
                "mean_ess_higher": mean_of(subject, "mean_ess").zip(mean_of(b, "mean_ess")).map(|(s, b)| s > b),
                "its_to_err10_lower": mean_of(subject, "its_to_err10_censored")
                    .zip(mean_of(b, "its_to_err10_censored"))
                    .map(|(s, b)| s < b),
            }));
        }
    }
    json!({ "observations": n, "algorithms": algorithms, "orderings": orderings })
}
