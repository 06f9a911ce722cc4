//! Experiment harness: configuration, ablation tags and the seeded runner.

pub mod ablation;
pub mod config;
pub mod runner;

pub use ablation::{expand_ablation, Ablation, Modes};
pub use config::{ConfigError, MapSource, RunConfig};
pub use runner::{
    aggregate, explorer_config, load_truth, run_experiment, run_seed, run_seeds, sample_start, sweep_alpha,
    workers_from_env, ExperimentError, MetricsRow, RunReport, SeedRun, SummaryRow, SweepRow, WORKERS_ENV,
};
