//! Frontier cells (known-free cells touching unknown space) clustered by
//! 8-connectivity.

use std::collections::VecDeque;

use nalgebra::Point2;

use super::planner::Costmap;
use super::{CellClass, DecisionConfig, Frontier};
use crate::grid::{CellIndex, OccupancyGrid};

const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

fn neighbors<'a>(
    map: &'a OccupancyGrid,
    c: CellIndex,
    offsets: &'a [(i64, i64)],
) -> impl Iterator<Item = CellIndex> + 'a {
    offsets.iter().filter_map(move |&(dr, dc)| {
        let r = c.row as i64 + dr;
        let q = c.col as i64 + dc;
        map.contains_signed(r, q)
            .then(|| CellIndex::new(r as usize, q as usize))
    })
}

pub fn is_frontier_cell(map: &OccupancyGrid, c: CellIndex, cfg: &DecisionConfig) -> bool {
    cfg.classify(map.prob(c)) == CellClass::Free
        && neighbors(map, c, &N4).any(|n| cfg.classify(map.prob(n)) == CellClass::Unknown)
}

/// Frontier clusters at least `min_cluster_size` cells large, largest first,
/// at most `max_candidates` of them.
pub fn extract_frontiers(map: &OccupancyGrid, cfg: &DecisionConfig) -> Vec<Frontier> {
    let flags: Vec<bool> = map.cells().map(|c| is_frontier_cell(map, c, cfg)).collect();
    let mut seen = vec![false; map.len()];
    let costmap = Costmap::new(map, cfg);
    let mut out = Vec::new();
    for start in map.cells() {
        let si = map.index(start);
        if !flags[si] || seen[si] {
            continue;
        }
        let mut cluster = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[si] = true;
        while let Some(c) = queue.pop_front() {
            cluster.push(c);
            for n in neighbors(map, c, &N8) {
                let ni = map.index(n);
                if flags[ni] && !seen[ni] {
                    seen[ni] = true;
                    queue.push_back(n);
                }
            }
        }
        if cluster.len() < cfg.min_cluster_size {
            continue;
        }
        cluster.sort();
        let centroid = {
            let sum = cluster
                .iter()
                .map(|&c| map.cell_center(c).coords)
                .fold(nalgebra::Vector2::zeros(), |a, b| a + b);
            Point2::from(sum / cluster.len() as f64)
        };
        let goal_cell = goal_near(map, &costmap, &cluster, centroid, cfg);
        out.push(Frontier {
            cells: cluster,
            centroid,
            goal_cell,
        });
    }
    out.sort_by(|a, b| b.cells.len().cmp(&a.cells.len()).then(a.cells[0].cmp(&b.cells[0])));
    out.truncate(cfg.max_candidates.max(1));
    out
}

/// Free, non-inflated cell closest to the centroid, searched outward from the
/// cluster through free space one BFS layer at a time.
fn goal_near(
    map: &OccupancyGrid,
    costmap: &Costmap,
    cluster: &[CellIndex],
    centroid: Point2<f64>,
    cfg: &DecisionConfig,
) -> CellIndex {
    let dist = |c: CellIndex| (map.cell_center(c) - centroid).norm();
    let closest_member = *cluster
        .iter()
        .min_by(|a, b| dist(**a).total_cmp(&dist(**b)).then(a.cmp(b)))
        .expect("non-empty cluster");
    let mut seen = vec![false; map.len()];
    let mut layer: Vec<CellIndex> = cluster.to_vec();
    for &c in &layer {
        seen[map.index(c)] = true;
    }
    for _ in 0..50 {
        let ok: Vec<CellIndex> = layer.iter().copied().filter(|&c| costmap.is_clear(c)).collect();
        if let Some(best) = ok
            .iter()
            .min_by(|a, b| dist(**a).total_cmp(&dist(**b)).then(a.cmp(b)))
        {
            return *best;
        }
        let mut next = Vec::new();
        for &c in &layer {
            for n in neighbors(map, c, &N8) {
                let ni = map.index(n);
                if !seen[ni] && cfg.classify(map.prob(n)) == CellClass::Free {
                    seen[ni] = true;
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort();
        layer = next;
    }
    closest_member
}
