use serde_json::json;
use simplicial::chain_rng;
use simplicial::diagnostics::{intermodal_jumps, mean_and_standard_error, normal_cdf, normal_quantile, qq_correlation, qq_points};
use simplicial::geometry::column;
use simplicial::samplers::{extra_dimensional_step, propose_simplex, unrotated_projection, ChainState, SimplicialConfig};
use simplicial::targets::{GaussianSpec, MixtureSpec};

use super::{finish, Experiment};
use crate::config::{ExperimentConfig, ProjectionConfig};
use crate::error::{HarnessError, Result};
use crate::results::{Artifact, ArtifactValue, ExperimentOutput};
use crate::runner::{base_record, run_job, standard_jobs, PreparedTarget, RunContext};

/// Extra-dimensional simplicial sampler: marginal accuracy and the geometry of
/// projected simplices.
pub struct ExtraDimensionalDemo;

const EXTRA: [&str; 2] = ["qq_min_correlation", "intermodal_jumps"];

/// χ²₂ quantile at 0.99.
const ELLIPSE_99: f64 = 9.21034037197618;

/// Rows kept per coordinate in the QQ artifact.
const QQ_ROWS: usize = 500;

impl Experiment for ExtraDimensionalDemo {
    fn name(&self) -> &'static str {
        "extra_dimensional_demo"
    }

    fn description(&self) -> &'static str {
        "QQ accuracy of the extra-dimensional sampler and projected-simplex point clouds"
    }

    fn validate(&self, config: &ExperimentConfig) -> Result<()> {
        if config.cases.is_empty() {
            return Err(HarnessError::Config("extra_dimensional_demo needs at least one case".into()));
        }
        if let Some(p) = &config.projection {
            if p.dimension != 2 {
                return Err(HarnessError::Config("projection dimension must be 2".into()));
            }
            if p.start.len() != p.dimension {
                return Err(HarnessError::Config("projection start must have `dimension` entries".into()));
            }
            if p.proposals < p.dimension {
                return Err(HarnessError::Config("projection needs proposals >= dimension".into()));
            }
            if !(p.correlation.abs() < 1.0) {
                return Err(HarnessError::Config("projection correlation must lie in (-1, 1)".into()));
            }
            if p.chains == 0 || p.steps == 0 {
                return Err(HarnessError::Config("projection needs at least one chain and one step".into()));
            }
        }
        Ok(())
    }

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput> {
        let cfg = &ctx.config;
        let jobs = standard_jobs(cfg);
        let results = ctx.parallel_map(&jobs, |job| {
            let mut target = PreparedTarget::build(&cfg.cases[job.case].target, job.dimension, None)?;
            let trace = run_job(ctx, job, &mut target)?;
            let mut rec = base_record(ctx, job, &trace)?;
            let burn = trace.burn_in_index(cfg.burn_in_fraction);
            let mut min_corr = f64::INFINITY;
            let mut qq_rows = Vec::new();
            for j in 0..trace.dim() {
                let samples = trace.coordinate(j, burn);
                let pairs = match &target {
                    PreparedTarget::Gaussian(g) => {
                        let sd = g.marginal_variances()[j].sqrt();
                        let mu = g.mean()[j];
                        qq_points(&samples, |p| mu + sd * normal_quantile(p))?
                    }
                    PreparedTarget::Mixture(m) => qq_points(&samples, |p| mixture_marginal_quantile(m, j, p))?,
                    PreparedTarget::Gp(_) => {
                        return Err(HarnessError::Config("extra_dimensional_demo does not support GP targets".into()))
                    }
                };
                min_corr = min_corr.min(qq_correlation(&pairs)?);
                if job.replicate == 0 {
                    let stride = pairs.len().div_ceil(QQ_ROWS).max(1);
                    for (x, q) in pairs.iter().step_by(stride) {
                        qq_rows.push(vec![
                            ArtifactValue::Text(job.experiment.clone()),
                            ArtifactValue::Integer(j as i64),
                            ArtifactValue::Number(*q),
                            ArtifactValue::Number(*x),
                        ]);
                    }
                }
            }
            rec.extra.insert("qq_min_correlation".into(), Some(min_corr));
            let jumps = match &target {
                PreparedTarget::Mixture(m) => Some(intermodal_jumps(trace.states(), &m.centers())? as f64),
                _ => None,
            };
            rec.extra.insert("intermodal_jumps".into(), jumps);
            Ok((rec, qq_rows))
        })?;

        let mut records = Vec::with_capacity(results.len());
        let mut qq_rows = Vec::new();
        for (rec, rows) in results {
            records.push(rec);
            qq_rows.extend(rows);
        }
        let mut artifacts = vec![Artifact {
            file_name: format!("{}_qq.csv", cfg.name()),
            columns: ["experiment", "coordinate", "reference_quantile", "sample_quantile"]
                .map(String::from)
                .to_vec(),
            rows: qq_rows,
        }];

        let mut qq = Vec::new();
        for case in &cfg.cases {
            let experiment = format!("{}/{}", cfg.experiment, case.label);
            let corr: Vec<f64> = records
                .iter()
                .filter(|r| r.experiment == experiment)
                .filter_map(|r| r.value("qq_min_correlation"))
                .collect();
            qq.push(json!({
                "experiment": experiment,
                "min_qq_correlation": corr.iter().copied().reduce(f64::min),
                "mean_qq_correlation": mean_and_standard_error(&corr).ok().map(|x| x.0),
            }));
        }

        let projection = match &cfg.projection {
            Some(p) => {
                let (summary, artifact) = projection_demo(p, cfg.base_seed, ctx)?;
                artifacts.push(Artifact {
                    file_name: format!("{}_projection.csv", cfg.name()),
                    ..artifact
                });
                summary
            }
            None => serde_json::Value::Null,
        };
        finish(ctx, &EXTRA, &[], records, json!({"qq": qq, "projection": projection}), artifacts)
    }
}

/// Quantile of coordinate `j` of a Gaussian mixture, by bisection on its CDF.
fn mixture_marginal_quantile(m: &MixtureSpec, j: usize, p: f64) -> f64 {
    let parts: Vec<(f64, f64, f64)> = m
        .components()
        .iter()
        .map(|(w, g)| (*w, g.mean()[j], g.marginal_variances()[j].sqrt()))
        .collect();
    let cdf = |x: f64| parts.iter().map(|(w, mu, sd)| w * normal_cdf((x - mu) / sd)).sum::<f64>();
    let lo_start = parts.iter().map(|(_, mu, sd)| mu - 40.0 * sd).fold(f64::INFINITY, f64::min);
    let hi_start = parts.iter().map(|(_, mu, sd)| mu + 40.0 * sd).fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_start, hi_start);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn projection_demo(p: &ProjectionConfig, seed: u64, ctx: &RunContext) -> Result<(serde_json::Value, Artifact)> {
    let d = p.dimension;
    let cov = nalgebra::DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { p.correlation });
    let target = GaussianSpec::full(vec![0.0; d], cov)?;
    let cfg = SimplicialConfig::with_simplex_dim(d, p.proposals, p.edge_length)?;

    // Largest group of unrotated vertices sharing one projected point.
    let unrotated = unrotated_projection(&p.start, &cfg)?;
    let mut coincident = 0;
    for i in 0..unrotated.ncols() {
        let here = column(&unrotated, i);
        let n = (0..unrotated.ncols()).filter(|&j| column(&unrotated, j) == here).count();
        coincident = coincident.max(n);
    }

    let mut rows = Vec::new();
    let point = |chain: usize, step: usize, kind: &str, x: &[f64]| {
        vec![
            ArtifactValue::Integer(chain as i64),
            ArtifactValue::Integer(step as i64),
            ArtifactValue::Text(kind.to_string()),
            ArtifactValue::Number(x[0]),
            ArtifactValue::Number(x[1]),
        ]
    };
    rows.push(point(0, 0, "initial", &p.start));
    for j in 0..unrotated.ncols() {
        rows.push(point(0, 0, "unrotated", column(&unrotated, j)));
    }

    let chains: Vec<usize> = (0..p.chains).collect();
    let outcomes = ctx.parallel_map(&chains, |&c| {
        let mut rng = chain_rng(seed.wrapping_add(c as u64));
        let mut state = ChainState::new(&target, p.start.clone())?;
        let mut cloud = Vec::new();
        let mut inside_at = None;
        for step in 1..=p.steps {
            if c == 0 {
                // Same draws as the step below, replayed from a clone.
                let vertices = propose_simplex(state.position(), &cfg, &mut rng.clone())?;
                for j in 0..vertices.ncols() {
                    cloud.push(point(c, step, "proposal", column(&vertices, j)));
                }
            }
            state = extra_dimensional_step(&state, &target, &cfg, &mut rng)?.state;
            if c == 0 {
                cloud.push(point(c, step, "selected", state.position()));
            }
            if inside_at.is_none() && target.mahalanobis_sq(state.position())? <= ELLIPSE_99 {
                inside_at = Some(step);
            }
        }
        Ok((inside_at, cloud))
    })?;
    let mut inside = 0;
    let mut first_steps = Vec::new();
    for (at, cloud) in outcomes {
        if let Some(s) = at {
            inside += 1;
            first_steps.push(s);
        }
        rows.extend(cloud);
    }
    let summary = json!({
        "proposals": p.proposals,
        "dimension": d,
        "vertices": unrotated.ncols(),
        "max_coincident_unrotated": coincident,
        "chains": p.chains,
        "steps": p.steps,
        "fraction_reaching_99_ellipse": inside as f64 / p.chains as f64,
        "first_step_inside": first_steps,
    });
    let artifact = Artifact {
        file_name: String::new(),
        columns: ["chain", "step", "kind", "x", "y"].map(String::from).to_vec(),
        rows,
    };
    Ok((summary, artifact))
}
