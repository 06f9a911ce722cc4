//! `cexplore`: run seeded exploration experiments and alpha sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 map I/O error,
//! 4 one or more seeds failed, 1 anything else (e.g. unwritable output).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coupled_explore::entropy::EntropySpec;
use coupled_explore::experiment::{
    run_experiment, sweep_alpha, workers_from_env, Ablation, ConfigError, ExperimentError, RunConfig, SummaryRow,
    WORKERS_ENV,
};

#[derive(Parser)]
#[command(name = "cexplore", version, about = "Coupled-uncertainty exploration experiments")]
#[command(after_help = "Worker threads default to the CPU count; set CEXPLORE_WORKERS to override. \
Logging follows RUST_LOG (default: info).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Run seeds first_seed..first_seed+N instead of the configured list.
    #[arg(long)]
    seed_count: Option<u64>,
    /// Ablation tag: A1..A5, B1..B3 or custom.
    #[arg(long)]
    ablation: Option<Ablation>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step limit per seed.
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a configuration and write metrics, summary, decision
    /// trace and map snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Entropy parameter for the configured family.
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Repeat a run for several alphas and write sweep.csv.
    Sweep {
        /// Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

enum Failure {
    Experiment(ExperimentError),
    SeedsFailed(usize),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Self::Experiment(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Experiment(e.into())
    }
}

fn load_config(path: Option<&PathBuf>, o: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = o.seed_count {
        let first = cfg.seeds.first().copied().unwrap_or(0);
        cfg.seeds = (first..first + n).collect();
    }
    if let Some(tag) = o.ablation {
        cfg.ablation = tag;
    }
    if let Some(dir) = &o.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(n) = o.max_steps {
        cfg.max_steps = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<6} {:>6} {:>8} {:>8} {:>9} {:>10} {:>7} {:>6}",
        "row", "seed", "rmse", "mae", "map_err", "ur_bits", "known", "steps"
    );
    for r in rows {
        println!(
            "{:<6} {:>6} {:>8.3} {:>8.3} {:>9.2} {:>10.3} {:>7.3} {:>6.0}",
            r.row,
            r.seed.map_or("-".to_string(), |s| s.to_string()),
            r.rmse,
            r.mae,
            r.map_error.unwrap_or(f64::NAN),
            r.uncertainty_reduction_bits,
            r.known_fraction,
            r.steps,
        );
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let workers = workers_from_env();
    log::info!("{workers} worker(s) ({WORKERS_ENV})");
    match cli.command {
        Command::Run {
            config,
            alpha,
            overrides,
        } => {
            let mut cfg = load_config(Some(&config), &overrides)?;
            if let Some(a) = alpha {
                cfg.decision.entropy = EntropySpec::new(cfg.decision.entropy.family(), a)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
            let report = run_experiment(&cfg, workers)?;
            let mut rows: Vec<SummaryRow> = report.runs.iter().map(|r| r.summary.clone()).collect();
            rows.extend(report.aggregate.iter().cloned());
            print_summary(&rows);
            println!("results in {}", report.output_dir.display());
            for (seed, msg) in &report.failures {
                eprintln!("seed {seed} failed: {msg}");
            }
            if !report.failures.is_empty() {
                return Err(Failure::SeedsFailed(report.failures.len()));
            }
        }
        Command::Sweep {
            config,
            alphas,
            overrides,
        } => {
            let cfg = load_config(config.as_ref(), &overrides)?;
            let rows = sweep_alpha(&cfg, &alphas, workers)?;
            println!(
                "{:<11} {:>6} {:>8} {:>9} {:>10} {:>7} {:>10}",
                "family", "alpha", "rmse", "map_err", "ur_bits", "known", "divergence"
            );
            for r in &rows {
                println!(
                    "{:<11} {:>6} {:>8.3} {:>9.2} {:>10.3} {:>7.3} {:>10.3}",
                    r.family,
                    r.alpha,
                    r.rmse,
                    r.map_error.unwrap_or(f64::NAN),
                    r.uncertainty_reduction_bits,
                    r.known_fraction,
                    r.choice_divergence
                );
            }
            println!("results in {}", cfg.output_dir.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::SeedsFailed(n)) => {
            eprintln!("error: {n} seed(s) failed");
            ExitCode::from(4)
        }
        Err(Failure::Experiment(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                ExperimentError::Config(_) => 2,
                ExperimentError::Map(_) => 3,
                ExperimentError::Seed { .. } => 4,
                ExperimentError::Output { .. } => 1,
            })
        }
    }
}
