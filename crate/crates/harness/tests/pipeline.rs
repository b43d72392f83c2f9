use simplicial_harness::error::HarnessError;
use simplicial_harness::results::{read_results, write_results, MetricSummary, COMMON_COLUMNS};
use simplicial_harness::{run_experiment, ExperimentConfig, ExperimentRegistry, RunContext, RunOptions};

const COMPARISON: &str = r#"
experiment = "gaussian_comparison"
iterations = 400
replicates = 3
base_seed = 5
timing = false
dimensions = [3]

[[cases]]
label = "spherical"
target = { kind = "spherical" }
samplers = [{ algorithm = "simpl", target_acceptance = 0.5 }, { algorithm = "rwm" }]
"#;

fn comparison() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(COMPARISON).unwrap()
}

fn run(cfg: ExperimentConfig, threads: usize) -> simplicial_harness::ExperimentOutput {
    ExperimentRegistry::builtin().run(&RunContext::new(cfg, false, threads)).unwrap()
}

#[test]
fn results_round_trip() {
    let out = run(comparison(), 2);
    let dir = tempfile::tempdir().unwrap();
    let paths = write_results(&out, dir.path(), false).unwrap();
    assert_eq!(read_results(&paths[0]).unwrap(), out.result);
}

#[test]
fn comparison_csv_has_the_common_columns() {
    let out = run(comparison(), 1);
    let dir = tempfile::tempdir().unwrap();
    let paths = write_results(&out, dir.path(), false).unwrap();
    let mut reader = csv::Reader::from_path(&paths[1]).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, COMMON_COLUMNS);
    assert_eq!(reader.records().count(), 6);
}

#[test]
fn existing_outputs_are_not_overwritten() {
    let out = run(comparison(), 1);
    let dir = tempfile::tempdir().unwrap();
    write_results(&out, dir.path(), false).unwrap();
    let e = write_results(&out, dir.path(), false).unwrap_err();
    assert!(matches!(e, HarnessError::Config(_)));
    assert_eq!(e.exit_code(), 2);
    write_results(&out, dir.path(), true).unwrap();
}

#[test]
fn empty_results_write_nothing() {
    let mut out = run(comparison(), 1);
    out.result.records.clear();
    let dir = tempfile::tempdir().unwrap();
    assert!(write_results(&out, dir.path(), false).is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn thread_count_does_not_change_results() {
    let a = run(comparison(), 1);
    let b = run(comparison(), 4);
    assert_eq!(a.result, b.result);
}

#[test]
fn replicate_seeds_follow_the_base_seed() {
    let out = run(comparison(), 1);
    for r in &out.result.records {
        assert_eq!(r.seed, 5 + r.replicate as u64);
    }
}

#[test]
fn seed_override_changes_the_chains() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        seed: Some(77),
        ..RunOptions::default()
    };
    let paths = run_experiment(&comparison(), &opts, dir.path()).unwrap();
    let r = read_results(&paths[0]).unwrap();
    assert_eq!(r.config.base_seed, 77);
    assert!(r.records.iter().all(|rec| rec.seed >= 77));
}

#[test]
fn quick_run_scales_iterations_and_replicates() {
    let mut cfg = comparison();
    cfg.iterations = 5000;
    cfg.replicates = 20;
    let q = cfg.quick();
    assert_eq!((q.iterations, q.replicates), (500, 2));
}

#[test]
fn gp_csv_adds_hyperparameter_and_error_columns() {
    let cfg = ExperimentConfig::from_toml_str(&format!(
        r#"
experiment = "gp_benchmark"
iterations = 100
replicates = 1
base_seed = 1
initialization = "misclassify"

[gp]
dataset = "{}/../../data/election_2016.csv"

[[cases]]
label = "election"
target = {{ kind = "gp_election" }}
samplers = [{{ algorithm = "simpl", target_acceptance = 0.5 }}]
"#,
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap();
    let out = run(cfg, 1);
    assert_eq!(out.result.records[0].value("initial_misclassification"), Some(48.0));
    let dir = tempfile::tempdir().unwrap();
    let paths = write_results(&out, dir.path(), false).unwrap();
    let mut reader = csv::Reader::from_path(&paths[1]).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let mut expected: Vec<&str> = COMMON_COLUMNS.to_vec();
    expected.extend(["ess_eta2", "ess_xi2", "ess_rho2", "ess_sigma2", "its_to_err10", "secs_to_err10"]);
    assert_eq!(header, expected);
}

#[test]
fn equal_centers_give_no_jumps() {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
experiment = "bimodal_study"
iterations = 300
replicates = 1
base_seed = 1
dimensions = [2]

[[cases]]
label = "collapsed"
target = { kind = "bimodal", separation = 0.0 }
samplers = [{ algorithm = "rwm" }]
"#,
    )
    .unwrap();
    let out = run(cfg, 1);
    assert_eq!(out.result.records[0].value("intermodal_jumps"), Some(0.0));
}

#[test]
fn standard_error_shrinks_with_replicates() {
    // Deterministic pseudo-random statistics from a fixed distribution.
    let mut state = 12345u64;
    let mut draw = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut ratio = 0.0;
    let trials = 200;
    for _ in 0..trials {
        let small: Vec<f64> = (0..10).map(|_| draw()).collect();
        let large: Vec<f64> = (0..40).map(|_| draw()).collect();
        ratio += MetricSummary::of(&small).standard_error.unwrap() / MetricSummary::of(&large).standard_error.unwrap();
    }
    ratio /= trials as f64;
    assert!((ratio / 2.0 - 1.0).abs() < 0.25, "{ratio}");
}
