//! Synthetic floorplans at 0.2 m resolution used by the experiments and tests.

use nalgebra::Point2;

use crate::grid::{CellIndex, OccupancyGrid, P_MIN};
use crate::explore::Frontier;
use crate::sensor::Pose;

pub const RESOLUTION: f64 = 0.2;

const OCC: f64 = 1.0 - P_MIN;

/// Floorplan builder: free space with axis-aligned walls one cell thick.
#[derive(Debug, Clone)]
pub struct Floorplan {
    grid: OccupancyGrid,
}

impl Floorplan {
    pub fn new(width_m: f64, height_m: f64) -> Self {
        let w = (width_m / RESOLUTION).round() as usize;
        let h = (height_m / RESOLUTION).round() as usize;
        let grid = OccupancyGrid::filled(w, h, RESOLUTION, Point2::origin(), P_MIN)
            .expect("positive fixture size");
        let mut plan = Self { grid };
        plan.boundary();
        plan
    }

    fn col(&self, x: f64) -> usize {
        ((x / RESOLUTION).floor().max(0.0) as usize).min(self.grid.width() - 1)
    }

    fn row(&self, y: f64) -> usize {
        ((y / RESOLUTION).floor().max(0.0) as usize).min(self.grid.height() - 1)
    }

    fn boundary(&mut self) {
        let (w, h) = (self.grid.width(), self.grid.height());
        for c in 0..w {
            self.grid.set_prob(CellIndex::new(0, c), OCC);
            self.grid.set_prob(CellIndex::new(h - 1, c), OCC);
        }
        for r in 0..h {
            self.grid.set_prob(CellIndex::new(r, 0), OCC);
            self.grid.set_prob(CellIndex::new(r, w - 1), OCC);
        }
    }

    /// Horizontal wall at `y` over `[x0, x1]`, leaving `doors` (x ranges) open.
    pub fn hwall(mut self, y: f64, x0: f64, x1: f64, doors: &[(f64, f64)]) -> Self {
        let r = self.row(y);
        for c in self.col(x0)..=self.col(x1) {
            let x = (c as f64 + 0.5) * RESOLUTION;
            if !doors.iter().any(|&(a, b)| x > a && x < b) {
                self.grid.set_prob(CellIndex::new(r, c), OCC);
            }
        }
        self
    }

    /// Vertical wall at `x` over `[y0, y1]`, leaving `doors` (y ranges) open.
    pub fn vwall(mut self, x: f64, y0: f64, y1: f64, doors: &[(f64, f64)]) -> Self {
        let c = self.col(x);
        for r in self.row(y0)..=self.row(y1) {
            let y = (r as f64 + 0.5) * RESOLUTION;
            if !doors.iter().any(|&(a, b)| y > a && y < b) {
                self.grid.set_prob(CellIndex::new(r, c), OCC);
            }
        }
        self
    }

    /// Solid rectangular obstacle.
    pub fn block(mut self, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        for r in self.row(y0)..=self.row(y1) {
            for c in self.col(x0)..=self.col(x1) {
                self.grid.set_prob(CellIndex::new(r, c), OCC);
            }
        }
        self
    }

    pub fn build(self) -> OccupancyGrid {
        self.grid
    }
}

/// 25×25 m: a 7 m wide hall across the middle with three rooms below and two
/// above, joined by 1.2 m doors.
pub fn corridor() -> OccupancyGrid {
    Floorplan::new(25.0, 25.0)
        .hwall(9.0, 0.0, 25.0, &[(3.0, 4.2), (11.0, 12.2), (19.0, 20.2)])
        .hwall(16.0, 0.0, 25.0, &[(6.0, 7.2), (15.0, 16.2), (22.0, 23.2)])
        .vwall(8.4, 0.0, 9.0, &[])
        .vwall(16.6, 0.0, 9.0, &[])
        .vwall(12.4, 16.0, 25.0, &[])
        .block(20.0, 11.5, 21.0, 13.5)
        .build()
}

/// 40×40 m: a 3×3 arrangement of rooms with doors between neighbours.
pub fn rooms() -> OccupancyGrid {
    Floorplan::new(40.0, 40.0)
        .vwall(13.4, 0.0, 40.0, &[(5.0, 6.4), (19.0, 20.4), (31.0, 32.4)])
        .vwall(26.6, 0.0, 40.0, &[(7.0, 8.4), (21.0, 22.4), (33.0, 34.4)])
        .hwall(13.4, 0.0, 40.0, &[(6.0, 7.4), (20.0, 21.4), (30.0, 31.4)])
        .hwall(26.6, 0.0, 40.0, &[(4.0, 5.4), (18.0, 19.4), (33.0, 34.4)])
        .block(5.0, 30.0, 7.0, 31.0)
        .block(30.0, 6.0, 31.0, 9.0)
        .build()
}

/// 50×50 m: a 7 m wide corridor looping around a central block, with a few
/// pillars and a side room.
pub fn loop_map() -> OccupancyGrid {
    Floorplan::new(50.0, 50.0)
        .block(7.0, 7.0, 43.0, 43.0)
        .block(20.0, 2.0, 20.8, 3.0)
        .block(46.0, 24.0, 47.0, 25.0)
        .block(28.0, 46.5, 29.0, 47.5)
        .build()
}

/// Truth map by name: `corridor`, `rooms` or `loop`.
pub fn by_name(name: &str) -> Option<OccupancyGrid> {
    match name {
        "corridor" => Some(corridor()),
        "rooms" => Some(rooms()),
        "loop" => Some(loop_map()),
        _ => None,
    }
}

/// Decision scene with two frontier goals of equal size: one at the far end
/// of mapped corridors, one around a small mapped pocket that can only be
/// reached through unmapped space.
#[derive(Debug, Clone)]
pub struct DecisionScene {
    pub truth: OccupancyGrid,
    /// Estimated map at decision time.
    pub map: OccupancyGrid,
    pub start: Pose,
    pub known_route_goal: Frontier,
    pub unknown_route_goal: Frontier,
}

/// A known vertical corridor (x in [2.2, 5]) joined at the bottom to a known
/// horizontal corridor (y in [2.2, 5]) that ends at x = 9 in unmapped space.
/// Part of the vertical corridor's east wall (y in [6, 9.5]) is an unmapped
/// opening; beyond it lies a mapped 0.4 × 1.4 m pocket. The robot faces down
/// the corridor beside the opening.
pub fn decision_scene() -> DecisionScene {
    let truth = Floorplan::new(20.0, 20.0)
        .vwall(2.0, 0.0, 18.0, &[])
        .vwall(5.0, 5.0, 18.0, &[(6.0, 9.5)])
        .hwall(2.0, 0.0, 20.0, &[])
        .hwall(5.0, 5.0, 14.0, &[])
        .hwall(18.0, 0.0, 5.0, &[])
        .block(14.0, 10.0, 15.0, 14.0)
        .build();
    let mut map = truth.unknown_like();
    let in_box = |p: Point2<f64>, x0: f64, x1: f64, y0: f64, y1: f64| p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1;
    let corridor_wall = |p: Point2<f64>| {
        in_box(p, 1.95, 2.2, 1.95, 18.2)
            || (in_box(p, 5.0, 5.2, 5.0, 18.2) && !(6.0..9.5).contains(&p.y))
            || in_box(p, 1.95, 9.0, 1.95, 2.2)
            || in_box(p, 5.0, 9.0, 5.0, 5.2)
            || in_box(p, 1.95, 5.2, 18.0, 18.2)
    };
    let corridor_free = |p: Point2<f64>| in_box(p, 2.2, 5.0, 2.2, 18.0) || in_box(p, 5.0, 9.0, 2.2, 5.0);
    let pocket = |p: Point2<f64>| in_box(p, 8.6, 9.0, 7.0, 8.4);
    let mut end_cells = Vec::new();
    let mut pocket_cells = Vec::new();
    for c in truth.cells() {
        let p = truth.cell_center(c);
        if corridor_wall(p) {
            map.set_prob(c, truth.prob(c));
            map.set_hit_count(c, 3);
        } else if corridor_free(p) {
            map.set_prob(c, P_MIN);
            if p.x > 8.8 {
                end_cells.push(c);
            }
        } else if pocket(p) {
            map.set_prob(c, P_MIN);
            pocket_cells.push(c);
        }
    }
    let frontier = |cells: Vec<CellIndex>| {
        let n = cells.len() as f64;
        let sum = cells
            .iter()
            .fold(nalgebra::Vector2::zeros(), |acc, &c| acc + map.cell_center(c).coords);
        let centroid = Point2::from(sum / n);
        let goal_cell = *cells
            .iter()
            .min_by(|a, b| {
                let da = (map.cell_center(**a) - centroid).norm();
                let db = (map.cell_center(**b) - centroid).norm();
                da.total_cmp(&db).then(a.cmp(b))
            })
            .expect("non-empty");
        Frontier {
            cells,
            centroid,
            goal_cell,
        }
    };
    let known_route_goal = frontier(end_cells);
    let unknown_route_goal = frontier(pocket_cells);
    DecisionScene {
        truth,
        map,
        start: Pose::new(3.6, 8.0, -std::f64::consts::FRAC_PI_2),
        known_route_goal,
        unknown_route_goal,
    }
}

/// Clearance of every free cell from the nearest occupied cell (meters),
/// computed by brute force over a bounded window.
pub fn clearance_at(truth: &OccupancyGrid, p: Point2<f64>, cap: f64) -> f64 {
    truth.nearest_obstacle_within(p, cap, 0.5).unwrap_or(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_sizes() {
        assert_eq!((corridor().width(), corridor().height()), (125, 125));
        assert_eq!(rooms().width(), 200);
        assert_eq!(loop_map().width(), 250);
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn decision_scene_has_two_equal_goals() {
        let s = decision_scene();
        let cell = s.map.world_to_cell(Point2::new(s.start.x, s.start.y)).unwrap();
        assert!(s.map.prob(cell) < 0.3 && s.truth.prob(cell) < 0.5);
        assert_eq!(s.known_route_goal.cells.len(), s.unknown_route_goal.cells.len());
        let cfg = crate::explore::DecisionConfig::default();
        for f in [&s.known_route_goal, &s.unknown_route_goal] {
            assert!(f.cells.iter().all(|&c| crate::explore::frontier::is_frontier_cell(&s.map, c, &cfg)));
        }
    }
}
