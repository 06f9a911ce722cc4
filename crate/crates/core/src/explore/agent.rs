//! The live exploration loop: decide on a frontier, follow the plan with the
//! pose estimate, and fuse odometry and scans as they arrive.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::frontier::extract_frontiers;
use super::planner::Follower;
use super::rollout::{apply_map_update, evaluate_candidates, select_action, MapModel, RolloutModel};
use super::DecisionConfig;
use crate::grid::{CellIndex, OccupancyGrid};
use crate::localization::{
    heading_align, predict, update_with, LocalizationMode, LocalizerConfig, MotionInput, PoseBelief,
};
use crate::mapping::MapUpdateParams;
use crate::sensor::{SensorError, SensorSpec};
use crate::sim::{NoiseSpec, SimWorld};

/// Which map drives frontier extraction, planning and rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionMapSource {
    /// The estimation map itself.
    Estimation,
    /// A second map built with the inverse sensor model at the pose mean.
    InverseShadow,
    /// A second tempered map built as if the pose were certain.
    CertainPoseShadow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorerConfig {
    pub decision: DecisionConfig,
    pub sensor: SensorSpec,
    /// Odometry noise assumed by the estimator.
    pub noise: NoiseSpec,
    pub localizer: LocalizerConfig,
    pub map_model: MapModel,
    pub map_params: MapUpdateParams,
    pub decision_source: DecisionMapSource,
    pub heading_align: bool,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            decision: DecisionConfig::default(),
            sensor: SensorSpec::default(),
            noise: NoiseSpec::default(),
            localizer: LocalizerConfig::default(),
            map_model: MapModel::TBayes,
            map_params: MapUpdateParams::default(),
            decision_source: DecisionMapSource::Estimation,
            heading_align: true,
        }
    }
}

impl ExplorerConfig {
    fn estimation_model(&self) -> RolloutModel {
        RolloutModel {
            localizer: self.localizer.clone(),
            map_model: self.map_model,
            ignore_pose_cov: false,
            map_params: self.map_params.clone(),
            noise: self.noise.clone(),
        }
    }

    /// Models the rollouts use, matching how the decision map is built.
    pub fn rollout_model(&self) -> RolloutModel {
        let base = self.estimation_model();
        match self.decision_source {
            DecisionMapSource::Estimation => base,
            DecisionMapSource::InverseShadow => RolloutModel {
                map_model: MapModel::Inverse,
                ..base
            },
            DecisionMapSource::CertainPoseShadow => RolloutModel {
                map_model: MapModel::TBayes,
                ignore_pose_cov: true,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub goal_cell: CellIndex,
    pub centroid: Point2<f64>,
    pub frontier_size: usize,
    pub path_length: f64,
    pub rollout_steps: usize,
    pub rollout_trace: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub step: u64,
    pub pose_mean: [f64; 3],
    pub cov_trace: f64,
    pub frontier_count: usize,
    pub candidates: Vec<CandidateSummary>,
    pub chosen: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExploreStatus {
    Running,
    /// No reachable frontier remains.
    Complete,
}

#[derive(Debug, Clone)]
pub struct StepEvent {
    pub step: u64,
    pub decision: Option<DecisionRecord>,
    pub scan_fused: bool,
    pub collided: bool,
    pub status: ExploreStatus,
}

/// Goals abandoned after this many collisions while pursuing them.
const COLLISION_LIMIT: usize = 3;
/// Consecutive decisions with frontiers but no reachable plan before the
/// explorer gives up.
const UNREACHABLE_LIMIT: usize = 5;
/// Steps spent reversing after a bump, and the reverse speed (m/s).
const BACKUP_STEPS: usize = 25;
const BACKUP_SPEED: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Explorer {
    cfg: ExplorerConfig,
    belief: PoseBelief,
    map: OccupancyGrid,
    shadow: Option<OccupancyGrid>,
    follower: Option<Follower>,
    goal: Option<CellIndex>,
    goal_collisions: usize,
    blacklist: Vec<Point2<f64>>,
    since_plan: usize,
    /// Remaining steps of an in-place spin after a failed decision.
    recovery_left: usize,
    backup_left: usize,
    unreachable: usize,
    started: bool,
    status: ExploreStatus,
}

impl Explorer {
    /// Starts from `initial_map` (usually all unknown) for both the estimation
    /// map and any decision shadow map.
    pub fn new(cfg: ExplorerConfig, belief: PoseBelief, initial_map: OccupancyGrid) -> Self {
        let shadow = match cfg.decision_source {
            DecisionMapSource::Estimation => None,
            _ => Some(initial_map.clone()),
        };
        Self {
            cfg,
            belief,
            map: initial_map,
            shadow,
            follower: None,
            goal: None,
            goal_collisions: 0,
            blacklist: Vec::new(),
            since_plan: 0,
            recovery_left: 0,
            backup_left: 0,
            unreachable: 0,
            started: false,
            status: ExploreStatus::Running,
        }
    }

    pub fn belief(&self) -> &PoseBelief {
        &self.belief
    }

    pub fn map(&self) -> &OccupancyGrid {
        &self.map
    }

    pub fn decision_map(&self) -> &OccupancyGrid {
        self.shadow.as_ref().unwrap_or(&self.map)
    }

    pub fn config(&self) -> &ExplorerConfig {
        &self.cfg
    }

    pub fn status(&self) -> ExploreStatus {
        self.status
    }

    /// Fuse a scan taken at the current (predicted) belief: heading alignment,
    /// range update against the map before this scan, then the map updates.
    pub fn fuse_scan(&mut self, scan: &crate::sensor::BeamScan) {
        let cfg = &self.cfg;
        let lidar = cfg.localizer.mode != LocalizationMode::OdomOnly;
        if lidar && cfg.heading_align {
            self.belief = heading_align(&self.belief, scan, &self.map, &cfg.sensor, cfg.localizer.occ_threshold);
        }
        self.belief = update_with(&self.belief, scan, &self.map, &cfg.sensor, &cfg.localizer);
        apply_map_update(&mut self.map, scan, &self.belief, &cfg.estimation_model(), &cfg.sensor);
        if let Some(shadow) = self.shadow.as_mut() {
            apply_map_update(shadow, scan, &self.belief, &cfg.rollout_model(), &cfg.sensor);
        }
    }

    /// Choose a frontier and start following its plan. Returns the record of
    /// the decision, with `chosen == None` when nothing is reachable.
    pub fn decide(&mut self, step: u64) -> DecisionRecord {
        let dcfg = &self.cfg.decision;
        let dmap = self.decision_map();
        let near_blacklisted = |c: CellIndex| {
            let p = dmap.cell_center(c);
            self.blacklist.iter().any(|b| (b - p).norm() < 2.0 * dcfg.goal_tolerance)
        };
        let frontiers: Vec<_> = extract_frontiers(dmap, dcfg)
            .into_iter()
            .filter(|f| !near_blacklisted(f.goal_cell))
            .collect();
        let candidates: Vec<_> = evaluate_candidates(
            dmap,
            &self.belief,
            &frontiers,
            dcfg,
            &self.cfg.sensor,
            &self.cfg.rollout_model(),
        )
        .into_iter()
        .filter(|c| !c.controls.is_empty())
        .collect();
        let chosen = select_action(&candidates);
        let record = DecisionRecord {
            step,
            pose_mean: [self.belief.mean.x, self.belief.mean.y, self.belief.mean.z],
            cov_trace: self.belief.trace(),
            frontier_count: frontiers.len(),
            candidates: candidates
                .iter()
                .map(|c| CandidateSummary {
                    goal_cell: c.goal.goal_cell,
                    centroid: c.goal.centroid,
                    frontier_size: c.goal.cells.len(),
                    path_length: c.path_length,
                    rollout_steps: c.rollout_steps,
                    rollout_trace: c.rollout_belief.as_ref().map_or(f64::NAN, |b| b.trace()),
                    gain: c.big,
                })
                .collect(),
            chosen,
        };
        match chosen {
            Some(i) => {
                let plan = &candidates[i];
                if self.goal != Some(plan.goal.goal_cell) {
                    self.goal_collisions = 0;
                }
                self.goal = Some(plan.goal.goal_cell);
                self.follower = Some(Follower::new(plan.waypoints.clone()));
                self.unreachable = 0;
            }
            None => {
                self.goal = None;
                self.follower = None;
                self.unreachable += 1;
                if frontiers.is_empty() || self.unreachable >= UNREACHABLE_LIMIT {
                    self.status = ExploreStatus::Complete;
                } else {
                    // spin in place: fresh scans may reconnect the estimate to the map
                    self.recovery_left = self.cfg.decision.replan_interval;
                }
            }
        }
        self.since_plan = 0;
        record
    }

    fn command(&mut self) -> Option<(f64, f64)> {
        if self.backup_left > 0 {
            self.backup_left -= 1;
            return Some((-BACKUP_SPEED, 0.0));
        }
        if self.recovery_left > 0 {
            self.recovery_left -= 1;
            return Some((0.0, 0.5 * self.cfg.decision.omega_max));
        }
        let mean = self.belief.mean;
        let dcfg = &self.cfg.decision;
        let cmd = self.follower.as_mut()?.command(&mean, dcfg);
        if cmd.is_none() {
            // goal reached: frontiers that keep pointing here are stale
            if let Some(g) = self.goal.take() {
                self.blacklist.push(self.decision_map().cell_center(g));
            }
            self.follower = None;
        }
        cmd
    }

    /// One control period: replan when due, drive, predict, and fuse a scan
    /// if the simulator produced one.
    pub fn explore_step(&mut self, sim: &mut SimWorld) -> Result<StepEvent, SensorError> {
        let step = sim.step_count();
        if self.status == ExploreStatus::Complete {
            return Ok(StepEvent {
                step,
                decision: None,
                scan_fused: false,
                collided: false,
                status: self.status,
            });
        }
        if !self.started {
            // a scan before the first decision gives the frontier search a footing
            let scan = sim.scan_now()?;
            self.fuse_scan(&scan);
            self.started = true;
        }
        let mut decision = None;
        let maneuvering = self.recovery_left > 0 || self.backup_left > 0;
        let due = !maneuvering && (self.follower.is_none() || self.since_plan >= self.cfg.decision.replan_interval);
        if due {
            decision = Some(self.decide(step));
        }
        let mut cmd = self.command();
        if cmd.is_none() && self.status == ExploreStatus::Running {
            decision = Some(self.decide(step));
            cmd = self.command();
        }
        let Some((v, omega)) = cmd else {
            return Ok(StepEvent {
                step,
                decision,
                scan_fused: false,
                collided: false,
                status: self.status,
            });
        };
        let dt = self.cfg.decision.dt;
        let out = sim.step_sim(&MotionInput::new(v, omega, dt))?;
        let odo = out.odometry;
        let u = self.cfg.noise.motion(odo.v, odo.omega, odo.dt, out.scan.is_some());
        self.belief = predict(&self.belief, &u);
        if let Some(scan) = &out.scan {
            self.fuse_scan(scan);
        }
        self.since_plan += 1;
        if out.collided {
            self.goal_collisions += 1;
            if self.goal_collisions >= COLLISION_LIMIT {
                if let Some(g) = self.goal.take() {
                    self.blacklist.push(self.decision_map().cell_center(g));
                }
                self.goal_collisions = 0;
            }
            self.follower = None;
            self.backup_left = BACKUP_STEPS;
        }
        Ok(StepEvent {
            step: sim.step_count(),
            decision,
            scan_fused: out.scan.is_some(),
            collided: out.collided,
            status: self.status,
        })
    }
}
