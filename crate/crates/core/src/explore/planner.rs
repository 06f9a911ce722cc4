//! Grid A* over an inflated costmap and a pure-pursuit waypoint follower.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use nalgebra::Point2;
use thiserror::Error;

use super::{CandidatePlan, CellClass, DecisionConfig, Frontier};
use crate::grid::{CellIndex, OccupancyGrid};
use crate::localization::{unicycle, wrap_angle, MotionInput};
use crate::sensor::Pose;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("start pose lies outside the map")]
    StartOutside,
    #[error("goal cell {0:?} is blocked or inflated")]
    GoalBlocked(CellIndex),
    #[error("no path to goal cell {0:?}")]
    NoPath(CellIndex),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cost {
    Free,
    Unknown,
    /// Within the inflation radius of an obstacle: traversable at a penalty.
    Inflated,
    /// Within the lethal radius: only traversable to leave it.
    Lethal,
    Occupied,
}

/// Step cost multiplier inside the inflation ring.
const INFLATION_PENALTY: f64 = 4.0;

/// Traversability of each cell: occupied cells, a lethal ring the robot body
/// cannot enter, a wider penalized ring, and unknown cells (double cost).
#[derive(Debug, Clone)]
pub struct Costmap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<Cost>,
}

impl Costmap {
    pub fn new(map: &OccupancyGrid, cfg: &DecisionConfig) -> Self {
        let mut cells: Vec<Cost> = map
            .probs()
            .iter()
            .map(|&p| match cfg.classify(p) {
                CellClass::Free => Cost::Free,
                CellClass::Unknown => Cost::Unknown,
                CellClass::Occupied => Cost::Occupied,
            })
            .collect();
        let res = map.resolution();
        let outer = cfg.inflation_radius.max(cfg.lethal_radius);
        let reach = (outer / res).ceil() as i64;
        let soft2 = (cfg.inflation_radius / res).powi(2) + 1e-9;
        let lethal2 = (cfg.lethal_radius / res).powi(2) + 1e-9;
        let (w, h) = (map.width() as i64, map.height() as i64);
        let occupied: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cost::Occupied).collect();
        for i in occupied {
            let (r0, c0) = ((i as i64) / w, (i as i64) % w);
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let (r, c) = (r0 + dr, c0 + dc);
                    let d2 = (dr * dr + dc * dc) as f64;
                    if r < 0 || c < 0 || r >= h || c >= w {
                        continue;
                    }
                    let j = (r * w + c) as usize;
                    cells[j] = match cells[j] {
                        Cost::Occupied => Cost::Occupied,
                        _ if d2 <= lethal2 => Cost::Lethal,
                        Cost::Lethal => Cost::Lethal,
                        _ if d2 <= soft2 => Cost::Inflated,
                        other => other,
                    };
                }
            }
        }
        Self {
            width: map.width(),
            height: map.height(),
            resolution: res,
            cells,
        }
    }

    fn at(&self, c: CellIndex) -> Cost {
        self.cells[c.row * self.width + c.col]
    }

    /// Free or unknown and outside every inflation ring.
    pub fn is_clear(&self, c: CellIndex) -> bool {
        matches!(self.at(c), Cost::Free | Cost::Unknown)
    }

    /// Outside the lethal ring.
    pub fn is_goal_ok(&self, c: CellIndex) -> bool {
        matches!(self.at(c), Cost::Free | Cost::Unknown | Cost::Inflated)
    }

    pub fn is_blocked(&self, c: CellIndex) -> bool {
        self.at(c) == Cost::Occupied
    }

    /// Lethal cells reachable from `start` through lethal cells: the robot may
    /// leave a lethal ring (or a wall the estimate has drifted into) it
    /// already sits in.
    fn escape_zone(&self, start: CellIndex) -> Vec<bool> {
        let mut zone = vec![false; self.cells.len()];
        if !matches!(self.at(start), Cost::Lethal | Cost::Occupied) {
            return zone;
        }
        let mut stack = vec![start];
        zone[start.row * self.width + start.col] = true;
        while let Some(c) = stack.pop() {
            for (n, _) in self.moves(c) {
                let i = n.row * self.width + n.col;
                if !zone[i] && self.cells[i] == Cost::Lethal {
                    zone[i] = true;
                    stack.push(n);
                }
            }
        }
        zone
    }

    fn moves(&self, c: CellIndex) -> impl Iterator<Item = (CellIndex, f64)> + '_ {
        const D: [(i64, i64); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        D.iter().filter_map(move |&(dr, dc)| {
            let r = c.row as i64 + dr;
            let q = c.col as i64 + dc;
            if r < 0 || q < 0 || r >= self.height as i64 || q >= self.width as i64 {
                return None;
            }
            let n = CellIndex::new(r as usize, q as usize);
            if dr != 0 && dc != 0 {
                // no corner cutting past occupied cells
                let a = CellIndex::new(c.row, q as usize);
                let b = CellIndex::new(r as usize, c.col);
                if self.is_blocked(a) || self.is_blocked(b) {
                    return None;
                }
                Some((n, SQRT_2))
            } else {
                Some((n, 1.0))
            }
        })
    }

    /// A* from `start` to `goal`; returns the cell path and its metric length.
    pub fn astar(&self, start: CellIndex, goal: CellIndex) -> Result<(Vec<CellIndex>, f64), PlanError> {
        if start == goal {
            return Ok((vec![start], 0.0));
        }
        if !self.is_goal_ok(goal) {
            return Err(PlanError::GoalBlocked(goal));
        }
        let escape = self.escape_zone(start);
        let idx = |c: CellIndex| c.row * self.width + c.col;
        let passable = |c: CellIndex| match self.at(c) {
            Cost::Free | Cost::Unknown | Cost::Inflated => true,
            Cost::Lethal => escape[idx(c)],
            Cost::Occupied => false,
        };
        let h = |c: CellIndex| {
            let dr = (c.row as f64 - goal.row as f64).abs();
            let dc = (c.col as f64 - goal.col as f64).abs();
            dr.max(dc) + (SQRT_2 - 1.0) * dr.min(dc)
        };
        let n = self.cells.len();
        let mut g = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut closed = vec![false; n];
        let mut heap = BinaryHeap::new();
        let mut counter = 0u64;
        g[idx(start)] = 0.0;
        heap.push(Node { f: h(start), tie: 0, cell: start });
        while let Some(Node { cell, .. }) = heap.pop() {
            let ci = idx(cell);
            if closed[ci] {
                continue;
            }
            closed[ci] = true;
            if cell == goal {
                let mut path = vec![cell];
                let mut cur = ci;
                while parent[cur] != usize::MAX {
                    cur = parent[cur];
                    path.push(CellIndex::new(cur / self.width, cur % self.width));
                }
                path.reverse();
                let len = path
                    .windows(2)
                    .map(|w| {
                        let diag = w[0].row != w[1].row && w[0].col != w[1].col;
                        if diag { SQRT_2 } else { 1.0 }
                    })
                    .sum::<f64>()
                    * self.resolution;
                return Ok((path, len));
            }
            for (nb, step) in self.moves(cell) {
                if !passable(nb) {
                    continue;
                }
                let mult = match self.at(nb) {
                    Cost::Unknown => 2.0,
                    Cost::Inflated => INFLATION_PENALTY,
                    _ => 1.0,
                };
                let cand = g[ci] + step * mult;
                let ni = idx(nb);
                if cand < g[ni] {
                    g[ni] = cand;
                    parent[ni] = ci;
                    counter += 1;
                    heap.push(Node { f: cand + h(nb), tie: counter, cell: nb });
                }
            }
        }
        Err(PlanError::NoPath(goal))
    }
}

#[derive(Debug, PartialEq)]
struct Node {
    f: f64,
    tie: u64,
    cell: CellIndex,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then FIFO on insertion order
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.tie.cmp(&self.tie))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Every `spacing`-th path cell center, always ending at the goal. The start
/// cell is dropped.
pub fn waypoints(map: &OccupancyGrid, path: &[CellIndex], spacing: usize) -> Vec<Point2<f64>> {
    if path.len() < 2 {
        return Vec::new();
    }
    let mut out: Vec<Point2<f64>> = path
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(i, _)| i % spacing.max(1) == 0)
        .map(|(_, &c)| map.cell_center(c))
        .collect();
    let last = map.cell_center(*path.last().expect("non-empty"));
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Velocity command steering `pose` toward `target`: turn in place when the
/// heading error is large, otherwise drive at `v_nom` scaled by its cosine.
pub fn pursuit_command(pose: &Pose, target: Point2<f64>, cfg: &DecisionConfig) -> (f64, f64) {
    let err = wrap_angle((target.y - pose.y).atan2(target.x - pose.x) - pose.z);
    let omega = (2.5 * err).clamp(-cfg.omega_max, cfg.omega_max);
    let v = if err.abs() > std::f64::consts::FRAC_PI_3 {
        0.0
    } else {
        let dist = (target - Point2::new(pose.x, pose.y)).norm();
        cfg.v_nom.min(dist / cfg.dt) * err.cos()
    };
    (v, omega)
}

/// Waypoint follower state shared by plan generation and live execution.
#[derive(Debug, Clone)]
pub struct Follower {
    pub waypoints: Vec<Point2<f64>>,
    pub next: usize,
}

impl Follower {
    pub fn new(waypoints: Vec<Point2<f64>>) -> Self {
        Self { waypoints, next: 0 }
    }

    pub fn finished(&self) -> bool {
        self.next >= self.waypoints.len()
    }

    /// Command for this step, or `None` once the last waypoint is reached.
    pub fn command(&mut self, pose: &Pose, cfg: &DecisionConfig) -> Option<(f64, f64)> {
        let here = Point2::new(pose.x, pose.y);
        while let Some(&wp) = self.waypoints.get(self.next) {
            if (wp - here).norm() <= cfg.goal_tolerance {
                self.next += 1;
            } else {
                break;
            }
        }
        let wp = *self.waypoints.get(self.next)?;
        Some(pursuit_command(pose, wp, cfg))
    }
}

/// Noise-free controls that follow `waypoints` from `start`, capped at `h_max`.
pub fn controls_for(start: &Pose, waypoints: &[Point2<f64>], cfg: &DecisionConfig) -> Vec<MotionInput> {
    let mut pose = *start;
    let mut follower = Follower::new(waypoints.to_vec());
    let mut out = Vec::new();
    while out.len() < cfg.h_max {
        let Some((v, w)) = follower.command(&pose, cfg) else { break };
        pose = unicycle(&pose, v, w, cfg.dt);
        out.push(MotionInput::new(v, w, cfg.dt));
    }
    out
}

/// A* to the frontier's goal cell, waypoints and follower controls. Rollout
/// fields are left empty.
pub fn plan_to_goal(
    map: &OccupancyGrid,
    costmap: &Costmap,
    start: &Pose,
    goal: &Frontier,
    cfg: &DecisionConfig,
) -> Result<CandidatePlan, PlanError> {
    let start_cell = map
        .world_to_cell(Point2::new(start.x, start.y))
        .map_err(|_| PlanError::StartOutside)?;
    let (path, path_length) = costmap.astar(start_cell, goal.goal_cell)?;
    let wps = waypoints(map, &path, cfg.waypoint_spacing);
    let controls = controls_for(start, &wps, cfg);
    Ok(CandidatePlan {
        goal: goal.clone(),
        path,
        waypoints: wps,
        controls,
        path_length,
        rollout_belief: None,
        rollout_map: None,
        rollout_steps: 0,
        big: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::P_MIN;

    fn corridor() -> OccupancyGrid {
        let mut g = OccupancyGrid::filled(100, 12, 0.2, Point2::origin(), P_MIN).unwrap();
        for c in 0..100 {
            g.set_prob(CellIndex::new(0, c), 1.0);
            g.set_prob(CellIndex::new(11, c), 1.0);
        }
        g
    }

    fn frontier_at(c: CellIndex, g: &OccupancyGrid) -> Frontier {
        Frontier {
            cells: vec![c],
            centroid: g.cell_center(c),
            goal_cell: c,
        }
    }

    #[test]
    fn straight_corridor_path_is_near_euclidean() {
        let g = corridor();
        let cfg = DecisionConfig::default();
        let cm = Costmap::new(&g, &cfg);
        let a = CellIndex::new(6, 3);
        let b = CellIndex::new(5, 90);
        let (path, len) = cm.astar(a, b).unwrap();
        let euclid = (g.cell_center(a) - g.cell_center(b)).norm();
        assert!(len <= 1.05 * euclid, "{len} vs {euclid}");
        assert_eq!(path.first(), Some(&a));
        assert_eq!(path.last(), Some(&b));
    }

    #[test]
    fn goal_in_inflation_is_rejected() {
        let g = corridor();
        let cfg = DecisionConfig::default();
        let cm = Costmap::new(&g, &cfg);
        assert_eq!(
            cm.astar(CellIndex::new(6, 3), CellIndex::new(1, 50)),
            Err(PlanError::GoalBlocked(CellIndex::new(1, 50)))
        );
    }

    #[test]
    fn walled_off_goal_has_no_path() {
        let mut g = corridor();
        for r in 0..12 {
            g.set_prob(CellIndex::new(r, 50), 1.0);
        }
        let cfg = DecisionConfig::default();
        let cm = Costmap::new(&g, &cfg);
        assert_eq!(
            cm.astar(CellIndex::new(6, 3), CellIndex::new(6, 80)),
            Err(PlanError::NoPath(CellIndex::new(6, 80)))
        );
    }

    #[test]
    fn start_equals_goal_is_empty_plan() {
        let g = corridor();
        let cfg = DecisionConfig::default();
        let cm = Costmap::new(&g, &cfg);
        let c = CellIndex::new(6, 20);
        let p = g.cell_center(c);
        let plan = plan_to_goal(&g, &cm, &Pose::new(p.x, p.y, 0.0), &frontier_at(c, &g), &cfg).unwrap();
        assert!(plan.controls.is_empty());
        assert_eq!(plan.path_length, 0.0);
    }

    #[test]
    fn unknown_cells_cost_double() {
        let mut g = OccupancyGrid::filled(40, 40, 0.2, Point2::origin(), P_MIN).unwrap();
        // unknown band across the direct route, known detour around it
        for r in 0..30 {
            for c in 10..30 {
                g.set_prob(CellIndex::new(r, c), 0.5);
            }
        }
        let cfg = DecisionConfig::default();
        let cm = Costmap::new(&g, &cfg);
        let (path, _) = cm.astar(CellIndex::new(5, 5), CellIndex::new(5, 35)).unwrap();
        let through_unknown = path.iter().filter(|c| (g.prob(**c) - 0.5).abs() < 1e-9).count();
        // from row 5 crossing (+20) beats the detour; from row 25 the detour wins
        assert!(through_unknown > 0);
        let (short, _) = cm.astar(CellIndex::new(25, 5), CellIndex::new(25, 35)).unwrap();
        assert!(short.iter().all(|c| (g.prob(*c) - 0.5).abs() > 1e-9));
    }

    #[test]
    fn follower_reaches_goal() {
        let g = corridor();
        let cfg = DecisionConfig::default();
        let cm = Costmap::new(&g, &cfg);
        let goal = CellIndex::new(6, 60);
        let start = Pose::new(1.1, 1.1, 2.0);
        let plan = plan_to_goal(&g, &cm, &start, &frontier_at(goal, &g), &cfg).unwrap();
        assert!(!plan.controls.is_empty() && plan.controls.len() <= cfg.h_max);
        let mut pose = start;
        for u in &plan.controls {
            pose = unicycle(&pose, u.v, u.omega, u.dt);
        }
        let end = g.cell_center(goal);
        let reached = (Point2::new(pose.x, pose.y) - end).norm();
        // capped at h_max steps of v_nom·dt
        let budget = cfg.h_max as f64 * cfg.v_nom * cfg.dt;
        assert!(reached <= cfg.goal_tolerance + 1e-9 || plan.path_length > budget);
    }
}
