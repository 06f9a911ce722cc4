//! Monte Carlo runs over seeds: one live exploration per seed, metrics at
//! every LiDAR step, and the collected outputs written to a run directory.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::ablation::{expand_ablation, Modes};
use super::config::{ConfigError, MapSource, RunConfig};
use crate::entropy::{map_entropy, EntropySpec};
use crate::explore::{known_fraction, DecisionRecord, ExploreStatus, Explorer, ExplorerConfig};
use crate::fixtures;
use crate::grid::{load_truth_map, save_map, GridError, MapFormat, OccupancyGrid};
use crate::localization::{LocalizerConfig, PoseBelief};
use crate::sensor::Pose;
use crate::sim::{metrics_map_error, metrics_translation, metrics_uncertainty_reduction, SimWorld};

/// Version of the CSV row layouts below.
pub const SCHEMA_VERSION: u32 = 1;

/// Worker-count environment variable.
pub const WORKERS_ENV: &str = "CEXPLORE_WORKERS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("map: {0}")]
    Map(#[from] GridError),
    #[error("seed {seed}: {message}")]
    Seed { seed: u64, message: String },
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub schema: u32,
    pub seed: u64,
    pub step: u64,
    /// Running position RMSE over LiDAR steps so far (m).
    pub rmse: f64,
    pub mae: f64,
    pub pos_error: f64,
    pub map_error: Option<f64>,
    /// Shannon entropy of the estimation map.
    pub map_entropy_nats: f64,
    pub trace_cov: f64,
    pub decisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub schema: u32,
    /// `seed`, `mean` or `std`.
    pub row: String,
    pub seed: Option<u64>,
    pub ablation: String,
    pub family: String,
    pub alpha: f64,
    pub status: String,
    pub steps: f64,
    pub decisions: f64,
    pub collisions: f64,
    pub rmse: f64,
    pub mae: f64,
    pub map_error: Option<f64>,
    pub uncertainty_reduction_bits: f64,
    pub known_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub summary: SummaryRow,
    pub rows: Vec<MetricsRow>,
    pub decisions: Vec<DecisionRecord>,
    pub snapshots: Vec<(String, OccupancyGrid)>,
    pub final_map: OccupancyGrid,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub failures: Vec<(u64, String)>,
    pub aggregate: Vec<SummaryRow>,
}

pub fn load_truth(source: &MapSource) -> Result<OccupancyGrid, ExperimentError> {
    match source {
        MapSource::Fixture(name) => fixtures::by_name(name).ok_or_else(|| {
            ConfigError::Invalid(format!("unknown fixture `{name}` (corridor, rooms, loop)")).into()
        }),
        MapSource::File(path) => Ok(load_truth_map(path, MapFormat::from_path(path))?),
    }
}

pub fn resolve_modes(cfg: &RunConfig) -> Modes {
    expand_ablation(cfg.ablation).unwrap_or(Modes {
        localization: cfg.custom.localization,
        map_model: cfg.custom.map_model,
        decision_map: cfg.custom.decision_map,
    })
}

pub fn explorer_config(cfg: &RunConfig) -> ExplorerConfig {
    let modes = resolve_modes(cfg);
    ExplorerConfig {
        decision: cfg.decision.clone(),
        sensor: cfg.sensor.clone(),
        noise: cfg.sim.noise.clone(),
        localizer: LocalizerConfig {
            mode: modes.localization,
            gamma: cfg.decision.gamma,
            variance: cfg.range_variance,
            occ_threshold: cfg.decision.occ_threshold,
            association: cfg.hit_association,
        },
        map_model: modes.map_model,
        map_params: cfg.map_params.clone(),
        decision_source: modes.decision_map,
        heading_align: cfg.heading_align,
    }
}

/// Uniform start over free cells at least `clearance` from any wall; the
/// clearance is halved when nothing qualifies. Heading is uniform.
pub fn sample_start(truth: &OccupancyGrid, seed: u64, clearance: f64, robot_radius: f64) -> Option<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_57a7_0000_0001);
    let floor = robot_radius + truth.resolution();
    let mut need = clearance.max(floor);
    loop {
        for _ in 0..20_000 {
            let idx = rng.random_range(0..truth.len());
            let c = truth.cell_at(idx);
            if truth.is_occupied(c) {
                continue;
            }
            let p = truth.cell_center(c);
            if truth.nearest_obstacle_within(p, need, 0.5).is_none() {
                let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                return Some(Pose::new(p.x, p.y, heading));
            }
        }
        if need <= floor {
            return None;
        }
        need = (need / 2.0).max(floor);
    }
}

/// Consecutive steps without sim progress before a run is declared stalled.
const STALL_LIMIT: usize = 100;

pub fn run_seed(cfg: &RunConfig, truth: &OccupancyGrid, seed: u64) -> Result<SeedRun, ExperimentError> {
    let seed_err = |message: String| ExperimentError::Seed { seed, message };
    let start = sample_start(truth, seed, cfg.start_clearance, cfg.sim.robot_radius)
        .ok_or_else(|| seed_err("no free start cell".into()))?;
    let mut sim = SimWorld::new(truth.clone(), start, cfg.sim.clone(), cfg.sensor.clone(), seed)
        .map_err(|e| seed_err(e.to_string()))?;
    let xcfg = explorer_config(cfg);
    let cov = Matrix3::from_diagonal(&Vector3::new(
        cfg.init_pos_std.powi(2),
        cfg.init_pos_std.powi(2),
        cfg.init_heading_std.powi(2),
    ));
    let mut explorer = Explorer::new(xcfg, PoseBelief::new(start, cov), truth.unknown_like());
    let shannon = EntropySpec::shannon();

    let mut rows = Vec::new();
    let mut decisions = Vec::new();
    let mut snapshots = Vec::new();
    let mut est = Vec::new();
    let mut tru = Vec::new();
    let (mut sq, mut abs) = (0.0, 0.0);
    let mut chosen = 0usize;
    let mut collisions = 0usize;
    let mut stalled = 0usize;
    let mut status = "max_steps";
    while sim.step_count() < cfg.max_steps {
        let before = sim.step_count();
        let ev = explorer.explore_step(&mut sim).map_err(|e| seed_err(e.to_string()))?;
        collisions += ev.collided as usize;
        if let Some(d) = ev.decision {
            if d.chosen.is_some() {
                chosen += 1;
                if cfg.snapshot_every > 0 && chosen.is_multiple_of(cfg.snapshot_every) {
                    snapshots.push((format!("seed{seed}_d{chosen:04}"), explorer.map().clone()));
                }
            }
            decisions.push(d);
        }
        if ev.scan_fused {
            let b = explorer.belief();
            let t = sim.true_pose();
            let e = Point2::new(b.mean.x, b.mean.y);
            let g = Point2::new(t.x, t.y);
            let err = (e - g).norm();
            sq += err * err;
            abs += err;
            est.push(e);
            tru.push(g);
            let n = est.len() as f64;
            rows.push(MetricsRow {
                schema: SCHEMA_VERSION,
                seed,
                step: sim.step_count(),
                rmse: (sq / n).sqrt(),
                mae: abs / n,
                pos_error: err,
                map_error: metrics_map_error(explorer.map(), truth).ok().flatten(),
                map_entropy_nats: map_entropy(explorer.map(), &shannon),
                trace_cov: b.trace(),
                decisions: chosen,
            });
        }
        if ev.status == ExploreStatus::Complete {
            status = "complete";
            break;
        }
        stalled = if sim.step_count() == before { stalled + 1 } else { 0 };
        if stalled >= STALL_LIMIT {
            status = "stalled";
            break;
        }
    }
    snapshots.push((format!("seed{seed}_final"), explorer.map().clone()));
    let (rmse, mae) = if est.is_empty() {
        (0.0, 0.0)
    } else {
        metrics_translation(&est, &tru).map_err(|e| seed_err(e.to_string()))?
    };
    let series: Vec<f64> = rows.iter().map(|r| r.map_entropy_nats).collect();
    let reduction = metrics_uncertainty_reduction(&series, 1);
    let summary = SummaryRow {
        schema: SCHEMA_VERSION,
        row: "seed".into(),
        seed: Some(seed),
        ablation: cfg.ablation.to_string(),
        family: cfg.decision.entropy.family().to_string(),
        alpha: cfg.decision.entropy.alpha(),
        status: status.into(),
        steps: sim.step_count() as f64,
        decisions: chosen as f64,
        collisions: collisions as f64,
        rmse,
        mae,
        map_error: metrics_map_error(explorer.map(), truth).ok().flatten(),
        uncertainty_reduction_bits: reduction,
        known_fraction: known_fraction(explorer.map(), &cfg.decision),
    };
    Ok(SeedRun {
        seed,
        summary,
        rows,
        decisions,
        snapshots,
        final_map: explorer.map().clone(),
    })
}

/// Worker count from the environment, defaulting to the available cores.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run every seed, `workers` at a time. Results come back in seed order.
pub fn run_seeds(
    cfg: &RunConfig,
    truth: &OccupancyGrid,
    workers: usize,
) -> Vec<Result<SeedRun, ExperimentError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            Ok(pool) => pool.install(|| cfg.seeds.par_iter().map(|&s| run_seed(cfg, truth, s)).collect()),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running seeds sequentially");
                cfg.seeds.iter().map(|&s| run_seed(cfg, truth, s)).collect()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        cfg.seeds.iter().map(|&s| run_seed(cfg, truth, s)).collect()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Mean and sample standard deviation rows over per-seed summaries. Map
/// error averages only seeds where it is defined.
pub fn aggregate(seeds: &[SummaryRow]) -> Vec<SummaryRow> {
    let Some(first) = seeds.first() else {
        return Vec::new();
    };
    let col = |f: &dyn Fn(&SummaryRow) -> f64| -> (f64, f64) {
        mean_std(&seeds.iter().map(f).collect::<Vec<_>>())
    };
    let map_errs: Vec<f64> = seeds.iter().filter_map(|s| s.map_error).collect();
    let me = (!map_errs.is_empty()).then(|| mean_std(&map_errs));
    let stats = [
        col(&|s| s.steps),
        col(&|s| s.decisions),
        col(&|s| s.collisions),
        col(&|s| s.rmse),
        col(&|s| s.mae),
        col(&|s| s.uncertainty_reduction_bits),
        col(&|s| s.known_fraction),
    ];
    ["mean", "std"]
        .into_iter()
        .enumerate()
        .map(|(k, name)| {
            let pick = |p: (f64, f64)| if k == 0 { p.0 } else { p.1 };
            SummaryRow {
                schema: SCHEMA_VERSION,
                row: name.into(),
                seed: None,
                ablation: first.ablation.clone(),
                family: first.family.clone(),
                alpha: first.alpha,
                status: String::new(),
                steps: pick(stats[0]),
                decisions: pick(stats[1]),
                collisions: pick(stats[2]),
                rmse: pick(stats[3]),
                mae: pick(stats[4]),
                map_error: me.map(pick),
                uncertainty_reduction_bits: pick(stats[5]),
                known_fraction: pick(stats[6]),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| out_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

#[derive(Serialize)]
struct DecisionLine<'a> {
    seed: u64,
    #[serde(flatten)]
    record: &'a DecisionRecord,
}

/// Run all seeds and write `config.ini`, `metrics.csv`, `summary.csv`,
/// `decisions.jsonl` and `snapshots/*.pgm` into the output directory. Seed
/// failures are recorded and reported, not fatal.
pub fn run_experiment(cfg: &RunConfig, workers: usize) -> Result<RunReport, ExperimentError> {
    cfg.validate()?;
    let truth = load_truth(&cfg.map)?;
    let out = cfg.output_dir.clone();
    let snap_dir = out.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| out_err(&snap_dir, e))?;
    let results = run_seeds(cfg, &truth, workers);

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in cfg.seeds.iter().zip(results) {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::error!("{e}");
                failures.push((*seed, e.to_string()));
            }
        }
    }

    let cfg_path = out.join("config.ini");
    fs::write(&cfg_path, cfg.to_ini_string()).map_err(|e| out_err(&cfg_path, e))?;
    let rows: Vec<&MetricsRow> = runs.iter().flat_map(|r| r.rows.iter()).collect();
    write_csv(&out.join("metrics.csv"), &rows)?;
    let seeds: Vec<SummaryRow> = runs.iter().map(|r| r.summary.clone()).collect();
    let agg = aggregate(&seeds);
    let mut summary = seeds.clone();
    summary.extend(agg.iter().cloned());
    write_csv(&out.join("summary.csv"), &summary)?;

    let jpath = out.join("decisions.jsonl");
    let mut jf = fs::File::create(&jpath).map_err(|e| out_err(&jpath, e))?;
    for run in &runs {
        for d in &run.decisions {
            let line = serde_json::to_string(&DecisionLine { seed: run.seed, record: d })
                .map_err(|e| out_err(&jpath, e))?;
            writeln!(jf, "{line}").map_err(|e| out_err(&jpath, e))?;
        }
    }
    for run in &runs {
        for (name, grid) in &run.snapshots {
            save_map(grid, &snap_dir.join(format!("{name}.pgm")))?;
        }
    }
    Ok(RunReport {
        output_dir: out,
        runs,
        failures,
        aggregate: agg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub schema: u32,
    pub family: String,
    pub alpha: f64,
    pub seeds: usize,
    pub rmse: f64,
    pub mae: f64,
    pub map_error: Option<f64>,
    pub uncertainty_reduction_bits: f64,
    pub known_fraction: f64,
    pub decisions: f64,
    /// Fraction of decisions, aligned by index within each seed, whose chosen
    /// goal differs from the first alpha's.
    pub choice_divergence: f64,
}

fn chosen_goals(run: &SeedRun) -> Vec<Option<crate::grid::CellIndex>> {
    run.decisions
        .iter()
        .map(|d| d.chosen.map(|i| d.candidates[i].goal_cell))
        .collect()
}

/// Repeat the experiment for each alpha (same family) under
/// `<output_dir>/alpha_<a>` and write `sweep.csv` with one row per alpha.
pub fn sweep_alpha(cfg: &RunConfig, alphas: &[f64], workers: usize) -> Result<Vec<SweepRow>, ExperimentError> {
    if alphas.len() < 2 {
        return Err(ConfigError::Invalid("a sweep needs at least two alphas".into()).into());
    }
    let family = cfg.decision.entropy.family();
    let mut rows = Vec::new();
    let mut reference: Option<Vec<Vec<Option<crate::grid::CellIndex>>>> = None;
    let mut failed = Vec::new();
    for &alpha in alphas {
        let mut c = cfg.clone();
        c.decision.entropy = EntropySpec::new(family, alpha).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.output_dir = cfg.output_dir.join(format!("alpha_{alpha}"));
        let report = run_experiment(&c, workers)?;
        failed.extend(report.failures.iter().cloned());
        let goals: Vec<_> = report.runs.iter().map(chosen_goals).collect();
        let divergence = match &reference {
            None => 0.0,
            Some(base) => {
                let (mut diff, mut total) = (0usize, 0usize);
                for (a, b) in base.iter().zip(&goals) {
                    for (x, y) in a.iter().zip(b) {
                        total += 1;
                        diff += (x != y) as usize;
                    }
                }
                if total == 0 { 0.0 } else { diff as f64 / total as f64 }
            }
        };
        if reference.is_none() {
            reference = Some(goals);
        }
        let mean = report.aggregate.first();
        rows.push(SweepRow {
            schema: SCHEMA_VERSION,
            family: family.to_string(),
            alpha,
            seeds: report.runs.len(),
            rmse: mean.map_or(f64::NAN, |m| m.rmse),
            mae: mean.map_or(f64::NAN, |m| m.mae),
            map_error: mean.and_then(|m| m.map_error),
            uncertainty_reduction_bits: mean.map_or(f64::NAN, |m| m.uncertainty_reduction_bits),
            known_fraction: mean.map_or(f64::NAN, |m| m.known_fraction),
            decisions: mean.map_or(f64::NAN, |m| m.decisions),
            choice_divergence: divergence,
        });
    }
    fs::create_dir_all(&cfg.output_dir).map_err(|e| out_err(&cfg.output_dir, e))?;
    write_csv(&cfg.output_dir.join("sweep.csv"), &rows)?;
    if let Some((seed, message)) = failed.into_iter().next() {
        return Err(ExperimentError::Seed { seed, message });
    }
    Ok(rows)
}
