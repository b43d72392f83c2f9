use std::collections::BTreeMap;

use serde_json::json;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{finish, Experiment};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::results::{ExperimentOutput, ReplicateRecord};
use crate::runner::{base_record, run_job, ChainJob, PreparedTarget, RunContext};
use simplicial::diagnostics::mean_and_standard_error;

/// Adaptive simplicial samplers over a grid of target acceptance rates, and
/// optionally over simplex dimensions `P < D`.
pub struct ScalingSweep;

const EXTRA: [&str; 3] = ["target_acceptance", "proposals", "edge_length"];
const GROUP: [&str; 2] = ["target_acceptance", "proposals"];

impl Experiment for ScalingSweep {
    fn name(&self) -> &'static str {
        "scaling_sweep"
    }

    fn description(&self) -> &'static str {
        "ESS against target acceptance rate and edge length for adaptive simplicial samplers"
    }

    fn validate(&self, config: &ExperimentConfig) -> Result<()> {
        let sweep = config
            .sweep
            .as_ref()
            .ok_or_else(|| HarnessError::Config("scaling_sweep needs a [sweep] section".into()))?;
        if config.cases.is_empty() {
            return Err(HarnessError::Config("scaling_sweep needs at least one case".into()));
        }
        if !sweep.proposal_fractions.is_empty() && sweep.proposal_dimension.is_none() {
            return Err(HarnessError::Config("proposal_fractions needs proposal_dimension".into()));
        }
        if sweep.proposal_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(HarnessError::Config("proposal fractions must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput> {
        let cfg = &ctx.config;
        let sweep = cfg.sweep.as_ref().expect("validated");
        let rates = sweep.rates()?;
        let mut jobs = Vec::new();
        for (ci, case) in cfg.cases.iter().enumerate() {
            for spec in &case.samplers {
                for &d in cfg.dimensions_for(case) {
                    for &rate in &rates {
                        for r in 0..cfg.replicates {
                            jobs.push(ChainJob {
                                case: ci,
                                experiment: format!("{}/{}", cfg.experiment, case.label),
                                spec: spec.clone().with_target_acceptance(rate),
                                dimension: d,
                                replicate: r,
                                seed: cfg.replicate_seed(r),
                                group: BTreeMap::from([("target_acceptance".into(), rate), ("proposals".into(), d as f64)]),
                            });
                        }
                    }
                }
                if let Some(d) = sweep.proposal_dimension {
                    let rate = sweep
                        .proposal_target_acceptance
                        .or(spec.target_acceptance)
                        .unwrap_or(0.5);
                    for p in sweep.proposal_counts(d) {
                        for r in 0..cfg.replicates {
                            jobs.push(ChainJob {
                                case: ci,
                                experiment: format!("{}/{}/proposals", cfg.experiment, case.label),
                                spec: spec.clone().with_target_acceptance(rate).with_proposals(p),
                                dimension: d,
                                replicate: r,
                                seed: cfg.replicate_seed(r),
                                group: BTreeMap::from([("target_acceptance".into(), rate), ("proposals".into(), p as f64)]),
                            });
                        }
                    }
                }
            }
        }

        let records = ctx.parallel_map(&jobs, |job| {
            let mut target = PreparedTarget::build(&cfg.cases[job.case].target, job.dimension, None)?;
            let trace = run_job(ctx, job, &mut target)?;
            let mut rec = base_record(ctx, job, &trace)?;
            rec.extra.insert("edge_length".into(), Some(trace.final_tuning()));
            Ok(rec)
        })?;

        let summary = json!({
            "optimal": optimal_cells(&records),
            "proposal_study": proposal_study(&records),
        });
        finish(ctx, &EXTRA, &GROUP, records, summary, Vec::new())
    }
}

/// Replicate-averaged `metric` per grouping value within one
/// (experiment, algorithm, dimension). Returns `(key value, mean metric,
/// mean edge length)` in order of first appearance.
fn cell_means(records: &[ReplicateRecord], cell: &CellKey, key: &str, metric: &str) -> Vec<(f64, f64, f64)> {
    let mut cells: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in records.iter().filter(|r| cell.matches(r)) {
        let (Some(k), Some(v)) = (r.value(key), r.value(metric)) else { continue };
        let lambda = r.value("edge_length").unwrap_or(f64::NAN);
        match cells.iter_mut().find(|c| c.0 == k) {
            Some(c) => {
                c.1.push(v);
                c.2.push(lambda);
            }
            None => cells.push((k, vec![v], vec![lambda])),
        }
    }
    cells
        .into_iter()
        .map(|(k, v, l)| (k, v.iter().sum::<f64>() / v.len() as f64, l.iter().sum::<f64>() / l.len() as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct CellKey {
    experiment: String,
    algorithm: String,
    dimension: usize,
}

impl CellKey {
    fn of(r: &ReplicateRecord) -> Self {
        Self {
            experiment: r.experiment.clone(),
            algorithm: r.algorithm.clone(),
            dimension: r.dimension,
        }
    }

    fn matches(&self, r: &ReplicateRecord) -> bool {
        r.experiment == self.experiment && r.algorithm == self.algorithm && r.dimension == self.dimension
    }
}

fn cell_keys<'a>(records: impl Iterator<Item = &'a ReplicateRecord>) -> Vec<CellKey> {
    let mut keys: Vec<CellKey> = Vec::new();
    for r in records {
        if !keys.iter().any(|k| k.matches(r)) {
            keys.push(CellKey::of(r));
        }
    }
    keys
}

/// Acceptance rate and edge length maximizing replicate-averaged mean and
/// minimum ESS, per (case, algorithm, dimension).
pub fn optimal_cells(records: &[ReplicateRecord]) -> Vec<serde_json::Value> {
    cell_keys(records.iter().filter(|r| !r.experiment.ends_with("/proposals")))
        .iter()
        .map(|k| {
            let best = |metric: &str| {
                let cells = cell_means(records, k, "target_acceptance", metric);
                let top = cells
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(rate, ess, lambda)| json!({"target_acceptance": rate, "ess": ess, "edge_length": lambda}));
                let curve: Vec<_> = cells
                    .iter()
                    .map(|(rate, ess, lambda)| json!({"target_acceptance": rate, "ess": ess, "edge_length": lambda}))
                    .collect();
                (top, curve)
            };
            let (best_mean, curve_mean) = best("mean_ess");
            let (best_min, curve_min) = best("min_ess");
            json!({
                "experiment": k.experiment,
                "algorithm": k.algorithm,
                "dimension": k.dimension,
                "best_mean_ess": best_mean,
                "best_min_ess": best_min,
                "mean_ess_curve": curve_mean,
                "min_ess_curve": curve_min,
            })
        })
        .collect()
}

/// Mean ESS per simplex dimension with one-sided paired t-tests of
/// "ESS does not decrease" between consecutive simplex dimensions.
fn proposal_study(records: &[ReplicateRecord]) -> Vec<serde_json::Value> {
    cell_keys(records.iter().filter(|r| r.experiment.ends_with("/proposals")))
        .iter()
        .map(|k| {
            let by_p = |p: f64| -> BTreeMap<usize, f64> {
                records
                    .iter()
                    .filter(|r| k.matches(r) && r.value("proposals") == Some(p))
                    .map(|r| (r.replicate, r.mean_ess))
                    .collect()
            };
            let mut ps: Vec<f64> = records
                .iter()
                .filter(|r| k.matches(r))
                .filter_map(|r| r.value("proposals"))
                .collect();
            ps.sort_by(f64::total_cmp);
            ps.dedup();
            let means: Vec<_> = ps
                .iter()
                .map(|p| {
                    let v: Vec<f64> = by_p(*p).into_values().collect();
                    let (m, se) = mean_and_standard_error(&v).unwrap_or((f64::NAN, f64::NAN));
                    json!({"proposals": p, "mean_ess": finite(m), "standard_error": finite(se)})
                })
                .collect();
            let tests: Vec<_> = ps
                .windows(2)
                .map(|w| {
                    let (lo, hi) = (by_p(w[0]), by_p(w[1]));
                    let diffs: Vec<f64> = hi.iter().filter_map(|(k, v)| lo.get(k).map(|l| v - l)).collect();
                    let p_value = paired_decrease_p_value(&diffs);
                    json!({
                        "from": w[0],
                        "to": w[1],
                        "mean_difference": finite(mean_and_standard_error(&diffs).map(|x| x.0).unwrap_or(f64::NAN)),
                        "p_value_decrease": p_value,
                        "non_decreasing": p_value.is_none_or(|p| p >= 0.05),
                    })
                })
                .collect();
            json!({
                "experiment": k.experiment,
                "algorithm": k.algorithm,
                "dimension": k.dimension,
                "mean_ess": means,
                "paired_tests": tests,
            })
        })
        .collect()
}

/// One-sided p-value for "mean difference < 0" from a paired t-test.
pub fn paired_decrease_p_value(diffs: &[f64]) -> Option<f64> {
    if diffs.len() < 2 {
        return None;
    }
    let (m, se) = mean_and_standard_error(diffs).ok()?;
    if se == 0.0 {
        return Some(if m < 0.0 { 0.0 } else { 1.0 });
    }
    let t = StudentsT::new(0.0, 1.0, (diffs.len() - 1) as f64).ok()?;
    Some(t.cdf(m / se))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
