//! Persisted experiment results: a JSON summary and a flat CSV table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simplicial::diagnostics::{mean_and_standard_error, median};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Leading CSV columns shared by every experiment.
pub const COMMON_COLUMNS: [&str; 12] = [
    "experiment",
    "algorithm",
    "dimension",
    "replicate",
    "seed",
    "iterations",
    "mean_ess",
    "min_ess",
    "mean_esss",
    "min_esss",
    "acceptance_rate",
    "wall_seconds",
];

/// Statistics of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub experiment: String,
    pub algorithm: String,
    pub dimension: usize,
    pub replicate: usize,
    pub seed: u64,
    pub iterations: usize,
    pub mean_ess: f64,
    pub min_ess: f64,
    pub mean_esss: Option<f64>,
    pub min_esss: Option<f64>,
    pub acceptance_rate: f64,
    pub wall_seconds: Option<f64>,
    /// Experiment-specific columns; missing values are `None`.
    #[serde(default)]
    pub extra: BTreeMap<String, Option<f64>>,
}

impl ReplicateRecord {
    /// Value of a named numeric column, common or extra.
    pub fn value(&self, column: &str) -> Option<f64> {
        match column {
            "dimension" => Some(self.dimension as f64),
            "replicate" => Some(self.replicate as f64),
            "iterations" => Some(self.iterations as f64),
            "mean_ess" => Some(self.mean_ess),
            "min_ess" => Some(self.min_ess),
            "mean_esss" => self.mean_esss,
            "min_esss" => self.min_esss,
            "acceptance_rate" => Some(self.acceptance_rate),
            "wall_seconds" => self.wall_seconds,
            other => self.extra.get(other).copied().flatten(),
        }
    }
}

/// Mean, standard error and median of one metric over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Number of replicates with a value.
    pub count: usize,
    pub mean: Option<f64>,
    pub standard_error: Option<f64>,
    pub median: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        match mean_and_standard_error(values) {
            Ok((mean, se)) => Self {
                count: values.len(),
                mean: Some(mean),
                standard_error: Some(se),
                median: median(values).ok(),
            },
            Err(_) => Self {
                count: 0,
                mean: None,
                standard_error: None,
                median: None,
            },
        }
    }
}

/// Replicate-level summaries for one (experiment, algorithm, dimension,
/// group) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub experiment: String,
    pub algorithm: String,
    pub dimension: usize,
    #[serde(default)]
    pub group: BTreeMap<String, f64>,
    pub replicates: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub library_version: String,
    pub experiment: String,
    pub name: String,
    pub quick: bool,
    /// The configuration actually run (after `--quick` and `--seed`).
    pub config: ExperimentConfig,
    pub extra_columns: Vec<String>,
    /// Extra columns that identify a cell rather than measure a chain.
    pub group_columns: Vec<String>,
    pub records: Vec<ReplicateRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Experiment-specific findings.
    pub summary: serde_json::Value,
    /// Additional files written next to the summary.
    #[serde(default)]
    pub artifact_files: Vec<String>,
}

/// A CSV file written next to the result.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<ArtifactValue>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactValue {
    Number(f64),
    Integer(i64),
    Text(String),
}

impl std::fmt::Display for ArtifactValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArtifactValue::Number(v) => write!(f, "{v}"),
            ArtifactValue::Integer(v) => write!(f, "{v}"),
            ArtifactValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub result: ExperimentResult,
    pub artifacts: Vec<Artifact>,
}

/// Groups records by cell, in order of first appearance.
pub fn aggregate(records: &[ReplicateRecord], extra_columns: &[String], group_columns: &[String]) -> Vec<Aggregate> {
    let mut cells: Vec<(Aggregate, Vec<&ReplicateRecord>)> = Vec::new();
    for r in records {
        let group: BTreeMap<String, f64> = group_columns
            .iter()
            .filter_map(|c| r.value(c).map(|v| (c.clone(), v)))
            .collect();
        let found = cells.iter_mut().find(|(a, _)| {
            a.experiment == r.experiment && a.algorithm == r.algorithm && a.dimension == r.dimension && a.group == group
        });
        match found {
            Some((_, members)) => members.push(r),
            None => cells.push((
                Aggregate {
                    experiment: r.experiment.clone(),
                    algorithm: r.algorithm.clone(),
                    dimension: r.dimension,
                    group,
                    replicates: 0,
                    metrics: BTreeMap::new(),
                },
                vec![r],
            )),
        }
    }
    let metric_names: Vec<&str> = COMMON_COLUMNS[6..]
        .iter()
        .copied()
        .chain(extra_columns.iter().map(String::as_str))
        .filter(|c| !group_columns.iter().any(|g| g == c))
        .collect();
    cells
        .into_iter()
        .map(|(mut a, members)| {
            a.replicates = members.len();
            for m in &metric_names {
                let values: Vec<f64> = members.iter().filter_map(|r| r.value(m)).collect();
                a.metrics.insert(m.to_string(), MetricSummary::of(&values));
            }
            a
        })
        .collect()
}

fn check_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(HarnessError::Config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// Paths that [`write_results`] would create for a result named `name`.
pub fn output_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.json")), dir.join(format!("{name}.csv")))
}

/// Fails if any primary output file exists and `force` is off.
pub fn ensure_outputs_free(dir: &Path, name: &str, force: bool) -> Result<()> {
    let (json, csv) = output_paths(dir, name);
    check_writable(&json, force)?;
    check_writable(&csv, force)
}

/// Writes `<name>.json`, `<name>.csv` and any artifacts into `dir`.
pub fn write_results(output: &ExperimentOutput, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    let result = &output.result;
    if result.records.is_empty() {
        return Err(HarnessError::Runtime("no replicate records to write".into()));
    }
    let (json_path, csv_path) = output_paths(dir, &result.name);
    let artifact_paths: Vec<PathBuf> = output.artifacts.iter().map(|a| dir.join(&a.file_name)).collect();
    for p in [&json_path, &csv_path].into_iter().chain(&artifact_paths) {
        check_writable(p, force)?;
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;

    let mut json = serde_json::to_string_pretty(result).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| HarnessError::io(&json_path, e))?;

    let mut header: Vec<String> = COMMON_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(result.extra_columns.iter().cloned());
    let rows = result.records.iter().map(|r| {
        let mut row = vec![
            r.experiment.clone(),
            r.algorithm.clone(),
            r.dimension.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.iterations.to_string(),
            r.mean_ess.to_string(),
            r.min_ess.to_string(),
            optional(r.mean_esss),
            optional(r.min_esss),
            r.acceptance_rate.to_string(),
            optional(r.wall_seconds),
        ];
        row.extend(result.extra_columns.iter().map(|c| optional(r.extra.get(c).copied().flatten())));
        row
    });
    write_csv(&csv_path, &header, rows)?;

    for (a, path) in output.artifacts.iter().zip(&artifact_paths) {
        write_csv(path, &a.columns, a.rows.iter().map(|row| row.iter().map(|v| v.to_string()).collect()))?;
    }

    let mut written = vec![json_path, csv_path];
    written.extend(artifact_paths);
    Ok(written)
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Runtime(format!("{}: {other:?}", path.display())),
    }
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let result: ExperimentResult =
        serde_json::from_str(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    if result.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::Data(format!(
            "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            result.schema_version
        )));
    }
    Ok(result)
}
