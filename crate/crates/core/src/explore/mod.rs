//! Frontier-driven exploration: candidate goals from frontier clusters, A*
//! plans followed by pure pursuit, rollouts that predict the belief and map
//! along each plan, and selection by information gain.

pub mod agent;
pub mod frontier;
pub mod planner;
pub mod rollout;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropySpec;
use crate::grid::{CellIndex, OccupancyGrid};
use crate::localization::{MotionInput, PoseBelief};

pub use agent::{
    CandidateSummary, DecisionMapSource, DecisionRecord, ExploreStatus, Explorer, ExplorerConfig, StepEvent,
};
pub use frontier::extract_frontiers;
pub use planner::{plan_to_goal, Costmap, PlanError};
pub use rollout::{evaluate_candidates, rollout, select_action, MapModel, RolloutModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub entropy: EntropySpec,
    pub gamma: f64,
    pub min_cluster_size: usize,
    pub free_threshold: f64,
    pub occ_threshold: f64,
    /// Cap on controls per candidate plan.
    pub h_max: usize,
    /// Controls between predicted scans in a rollout.
    pub rollout_scan_stride: usize,
    /// Beams per predicted scan; 0 uses the sensor's count.
    pub rollout_beams: usize,
    /// Obstacle clearance the planner penalizes.
    pub inflation_radius: f64,
    /// Obstacle clearance the planner never enters.
    pub lethal_radius: f64,
    pub v_nom: f64,
    pub omega_max: f64,
    pub dt: f64,
    /// Path cells between consecutive waypoints.
    pub waypoint_spacing: usize,
    pub goal_tolerance: f64,
    pub replan_interval: usize,
    /// Largest frontier clusters kept as candidates.
    pub max_candidates: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            entropy: EntropySpec::behavioral(1.0).expect("alpha 1 is valid"),
            gamma: 1.2,
            min_cluster_size: 5,
            free_threshold: 0.3,
            occ_threshold: 0.65,
            h_max: 400,
            rollout_scan_stride: 5,
            rollout_beams: 90,
            inflation_radius: 0.45,
            lethal_radius: 0.2,
            v_nom: 0.5,
            omega_max: 1.5,
            dt: 0.02,
            waypoint_spacing: 3,
            goal_tolerance: 0.25,
            replan_interval: 50,
            max_candidates: 8,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.free_threshold
            && self.free_threshold < 0.5
            && 0.5 < self.occ_threshold
            && self.occ_threshold < 1.0)
        {
            return Err(format!(
                "thresholds must satisfy 0 < free ({}) < 0.5 < occ ({}) < 1",
                self.free_threshold, self.occ_threshold
            ));
        }
        if self.h_max == 0 || self.rollout_scan_stride == 0 || self.waypoint_spacing == 0 {
            return Err("h_max, rollout_scan_stride and waypoint_spacing must be positive".into());
        }
        if !(self.dt > 0.0 && self.v_nom > 0.0 && self.omega_max > 0.0) {
            return Err("dt, v_nom and omega_max must be positive".into());
        }
        if self.inflation_radius < 0.0 || self.lethal_radius < 0.0 || self.gamma <= 0.0 {
            return Err("inflation and lethal radii must be non-negative and gamma positive".into());
        }
        Ok(())
    }

    pub fn classify(&self, p: f64) -> CellClass {
        if p < self.free_threshold {
            CellClass::Free
        } else if p >= self.occ_threshold {
            CellClass::Occupied
        } else {
            CellClass::Unknown
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Free,
    Unknown,
    Occupied,
}

/// Fraction of cells whose class is known (free or occupied).
pub fn known_fraction(map: &OccupancyGrid, cfg: &DecisionConfig) -> f64 {
    let known = map
        .probs()
        .iter()
        .filter(|&&p| cfg.classify(p) != CellClass::Unknown)
        .count();
    known as f64 / map.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub cells: Vec<CellIndex>,
    pub centroid: Point2<f64>,
    pub goal_cell: CellIndex,
}

#[derive(Debug, Clone)]
pub struct CandidatePlan {
    pub goal: Frontier,
    pub path: Vec<CellIndex>,
    pub waypoints: Vec<Point2<f64>>,
    pub controls: Vec<MotionInput>,
    /// Metric length of the grid path.
    pub path_length: f64,
    pub rollout_belief: Option<PoseBelief>,
    pub rollout_map: Option<OccupancyGrid>,
    pub rollout_steps: usize,
    pub big: f64,
}
