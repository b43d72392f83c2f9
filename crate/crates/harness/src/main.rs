use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use simplicial_harness::results::{read_results, COMMON_COLUMNS};
use simplicial_harness::{run_experiment, ExperimentConfig, ExperimentRegistry, HarnessError, RunContext, RunOptions};

#[derive(Parser)]
#[command(name = "simpl-bench", version, about = "Run and summarize simplicial sampler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its results.
    Run {
        config: PathBuf,
        /// Desk-scale run: 10% of the iterations and replicates.
        #[arg(long)]
        quick: bool,
        /// Output directory (default: the config's `output`, else `results`).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overwrite existing result files.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Leave wall-clock columns empty so output depends only on the config.
        #[arg(long)]
        no_timing: bool,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the aggregates of a result file.
    Summarize { result: PathBuf },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            config,
            quick,
            output,
            force,
            threads,
            seed,
            no_timing,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = output.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let opts = RunOptions {
                quick,
                threads,
                seed,
                force,
                timing: no_timing.then_some(false),
            };
            for path in run_experiment(&cfg, &opts, &dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ctx = RunContext::new(cfg, false, 1);
            let registry = ExperimentRegistry::builtin();
            let e = registry.validate(&ctx)?;
            if let Some(gp) = &ctx.config.gp {
                simplicial::targets::load_election_csv(&gp.dataset)?;
            }
            println!("{}: ok ({})", config.display(), e.name());
            Ok(())
        }
        Command::Summarize { result } => {
            let r = read_results(&result)?;
            println!(
                "{} `{}` (schema {}, library {}{})",
                r.experiment,
                r.name,
                r.schema_version,
                r.library_version,
                if r.quick { ", quick" } else { "" }
            );
            println!("{} replicate records", r.records.len());
            for a in &r.aggregates {
                let group: Vec<String> = a.group.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("{} {} D={} {} (n={})", a.experiment, a.algorithm, a.dimension, group.join(" "), a.replicates);
                for (metric, s) in &a.metrics {
                    if COMMON_COLUMNS.contains(&metric.as_str()) || r.extra_columns.contains(metric) {
                        match (s.mean, s.standard_error) {
                            (Some(m), Some(se)) => println!("  {metric:<20} {m:>12.4} ({se:.4})"),
                            (Some(m), None) => println!("  {metric:<20} {m:>12.4}"),
                            _ => {}
                        }
                    }
                }
            }
            println!("{}", serde_json::to_string_pretty(&r.summary).unwrap_or_default());
            Ok(())
        }
    }
}
