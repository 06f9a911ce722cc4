//! Forward simulation of a candidate plan on copies of the belief and map,
//! scored by the entropy drop of the predicted map.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::planner::{plan_to_goal, Costmap};
use super::{CandidatePlan, DecisionConfig, Frontier};
use crate::entropy::map_entropy;
use crate::grid::OccupancyGrid;
use crate::localization::{predict, update_with, LocalizerConfig, MotionInput, PoseBelief};
use crate::mapping::{inverse_update_scan, tbayes_update_scan, MapUpdateParams};
use crate::sensor::{predict_scan, SensorSpec};
use crate::sim::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapModel {
    /// Tempered update with pose uncertainty.
    TBayes,
    /// Log-odds inverse sensor model at the pose mean.
    Inverse,
}

/// Estimation models used inside a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutModel {
    pub localizer: LocalizerConfig,
    pub map_model: MapModel,
    /// Map updates see a zero pose covariance.
    pub ignore_pose_cov: bool,
    pub map_params: MapUpdateParams,
    pub noise: NoiseSpec,
}

impl Default for RolloutModel {
    fn default() -> Self {
        Self {
            localizer: LocalizerConfig::default(),
            map_model: MapModel::TBayes,
            ignore_pose_cov: false,
            map_params: MapUpdateParams::default(),
            noise: NoiseSpec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    pub belief: PoseBelief,
    pub map: OccupancyGrid,
    /// Controls applied before the end of the plan or leaving the grid.
    pub steps: usize,
}

/// Sensor used for predicted scans: the live sensor thinned to `rollout_beams`.
pub fn rollout_sensor(spec: &SensorSpec, cfg: &DecisionConfig) -> SensorSpec {
    let mut s = spec.clone();
    if cfg.rollout_beams > 0 && cfg.rollout_beams < spec.n_beams {
        s.n_beams = cfg.rollout_beams;
    }
    s
}

/// Apply one scan to a map under `model`.
pub fn apply_map_update(
    map: &mut OccupancyGrid,
    scan: &crate::sensor::BeamScan,
    belief: &PoseBelief,
    model: &RolloutModel,
    spec: &SensorSpec,
) {
    match model.map_model {
        MapModel::Inverse => {
            inverse_update_scan(map, scan, &belief.mean, &model.map_params, spec);
        }
        MapModel::TBayes if model.ignore_pose_cov => {
            let certain = PoseBelief::new(belief.mean, Matrix3::zeros());
            tbayes_update_scan(map, scan, &certain, &model.map_params, spec);
        }
        MapModel::TBayes => {
            tbayes_update_scan(map, scan, belief, &model.map_params, spec);
        }
    }
}

/// Predict along `controls`, and every `rollout_scan_stride` steps fuse a
/// scan predicted from the current map at the predicted mean. Inputs are not
/// modified.
pub fn rollout(
    controls: &[MotionInput],
    belief: &PoseBelief,
    map: &OccupancyGrid,
    cfg: &DecisionConfig,
    spec: &SensorSpec,
    model: &RolloutModel,
) -> RolloutOutcome {
    let sensor = rollout_sensor(spec, cfg);
    let mut b = belief.clone();
    let mut m = map.clone();
    let mut steps = 0;
    for (k, u) in controls.iter().enumerate() {
        let scan_step = (k + 1) % cfg.rollout_scan_stride == 0;
        let u = model.noise.motion(u.v, u.omega, u.dt, scan_step);
        let next = predict(&b, &u);
        if !m.contains_point(next.position()) {
            break;
        }
        b = next;
        steps += 1;
        if !scan_step {
            continue;
        }
        let Ok(scan) = predict_scan(&b.mean, &m, &sensor, cfg.occ_threshold) else {
            break;
        };
        b = update_with(&b, &scan, &m, &sensor, &model.localizer);
        apply_map_update(&mut m, &scan, &b, model, &sensor);
    }
    RolloutOutcome {
        belief: b,
        map: m,
        steps,
    }
}

/// Plan to every frontier, roll each plan out and record its information
/// gain. Frontiers without a plan are dropped; order is preserved.
pub fn evaluate_candidates(
    map: &OccupancyGrid,
    belief: &PoseBelief,
    frontiers: &[Frontier],
    cfg: &DecisionConfig,
    spec: &SensorSpec,
    model: &RolloutModel,
) -> Vec<CandidatePlan> {
    let costmap = Costmap::new(map, cfg);
    let plans: Vec<CandidatePlan> = frontiers
        .iter()
        .filter_map(|f| match plan_to_goal(map, &costmap, &belief.mean, f, cfg) {
            Ok(p) => Some(p),
            Err(e) => {
                log::debug!("frontier at {:?} skipped: {e}", f.goal_cell);
                None
            }
        })
        .collect();
    let h_now = map_entropy(map, &cfg.entropy);
    let score = |mut plan: CandidatePlan| {
        let out = rollout(&plan.controls, belief, map, cfg, spec, model);
        plan.big = h_now - map_entropy(&out.map, &cfg.entropy);
        plan.rollout_steps = out.steps;
        plan.rollout_belief = Some(out.belief);
        plan.rollout_map = Some(out.map);
        plan
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        plans.into_par_iter().map(score).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        plans.into_iter().map(score).collect()
    }
}

/// Index of the highest-gain candidate. Gains within a relative 1e-12 are
/// ties, broken by shorter path and then by lower index.
pub fn select_action(candidates: &[CandidatePlan]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Some(b) = best else {
            best = Some(i);
            continue;
        };
        let cur = &candidates[b];
        let tol = 1e-12 * cur.big.abs().max(1.0);
        if c.big > cur.big + tol || ((c.big - cur.big).abs() <= tol && c.path_length < cur.path_length) {
            best = Some(i);
        }
    }
    best
}
