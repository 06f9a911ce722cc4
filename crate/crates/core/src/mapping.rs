//! Occupancy updates: the tempered Bayesian update with pose uncertainty
//! projected into each cell's range likelihood, and the classical log-odds
//! inverse sensor model used by the baselines.

use nalgebra::{Matrix3, Point2, RowVector3};
use serde::{Deserialize, Serialize};

use crate::grid::{clamp_prob, traverse_ray_into, CellIndex, OccupancyGrid, RaySets};
use crate::localization::{range_jacobian, PoseBelief};
use crate::sensor::{gaussian_log_density, BeamScan, Pose, SensorSpec};

/// Tempering weights for cells a beam passes through without hitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PassCellWeighting {
    /// Weights from the cell's stored hit count, like hit cells.
    #[default]
    AsStored,
    /// Both hypotheses weighted by one.
    ForcedOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapUpdateParams {
    pub n_max: u32,
    pub l_occ: f64,
    pub l_free: f64,
    pub pass_cell_weighting: PassCellWeighting,
}

impl Default for MapUpdateParams {
    fn default() -> Self {
        Self {
            n_max: 3,
            l_occ: 0.85,
            l_free: -0.4,
            pass_cell_weighting: PassCellWeighting::AsStored,
        }
    }
}

impl MapUpdateParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_max < 1 {
            return Err("n_max must be at least 1".into());
        }
        if !(self.l_occ > 0.0 && self.l_free < 0.0) {
            return Err("inverse model needs l_occ > 0 > l_free".into());
        }
        Ok(())
    }
}

pub fn temper_weight(n_acc: u32, occupied_hypothesis: bool, n_max: u32) -> f64 {
    let n = n_acc.min(n_max) as f64;
    let cap = n_max as f64;
    if occupied_hypothesis {
        (cap - n) / cap
    } else {
        n / cap
    }
}

/// `H Σ Hᵀ + R_o` (occupied) or `+ R_u` (free).
pub fn projected_variance(
    pose_cov: &Matrix3<f64>,
    h: &RowVector3<f64>,
    occupied: bool,
    spec: &SensorSpec,
) -> f64 {
    let r = if occupied { spec.r_occ } else { spec.r_free };
    (h * pose_cov * h.transpose())[0] + r
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Binary Bayes update with tempered Gaussian likelihoods, in log-odds.
pub fn tempered_bayes(
    p_prior: f64,
    residual: f64,
    var_occ: f64,
    var_free: f64,
    w_occ: f64,
    w_free: f64,
) -> f64 {
    let l = logit(p_prior) + w_occ * gaussian_log_density(residual, 0.0, var_occ)
        - w_free * gaussian_log_density(residual, 0.0, var_free);
    clamp_prob(logistic(l))
}

/// Single-cell update for a reading `z` against the cell's expected range.
#[allow(clippy::too_many_arguments)]
pub fn tbayes_update_cell(
    p_prior: f64,
    z: f64,
    expected: f64,
    n_acc: u32,
    pose_belief: &PoseBelief,
    h: &RowVector3<f64>,
    params: &MapUpdateParams,
    spec: &SensorSpec,
) -> f64 {
    tempered_bayes(
        p_prior,
        z - expected,
        projected_variance(&pose_belief.cov, h, true, spec),
        projected_variance(&pose_belief.cov, h, false, spec),
        temper_weight(n_acc, true, params.n_max),
        temper_weight(n_acc, false, params.n_max),
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanUpdateStats {
    pub beams: usize,
    pub hit_cells: usize,
    pub cell_updates: usize,
}

/// Below this distance the range Jacobian is undefined and the cell is skipped.
const SINGULAR_DISTANCE: f64 = 1e-9;

/// Apply one scan to `map` in place. Beams are processed in index order; a
/// beam's hit count is incremented before its weights are computed. On a
/// max-range beam, cells within one cell of `z_max` are left alone.
pub fn tbayes_update_scan(
    map: &mut OccupancyGrid,
    scan: &BeamScan,
    belief: &PoseBelief,
    params: &MapUpdateParams,
    spec: &SensorSpec,
) -> ScanUpdateStats {
    let mut stats = ScanUpdateStats::default();
    let origin = belief.position();
    if !map.contains_point(origin) {
        return stats;
    }
    let mut rays = RaySets::default();
    let res = map.resolution();
    for (k, z, a) in scan.beams() {
        if traverse_ray_into(map, origin, belief.mean.z + a, z, spec.z_max, &mut rays).is_err() {
            continue;
        }
        stats.beams += 1;
        if let Some(hit) = rays.hit_cell {
            map.record_hit(hit, params.n_max);
            stats.hit_cells += 1;
        }
        let max_range = scan.is_max_range(k);
        for (cell, is_hit) in rays.cells() {
            let (h, d) = range_jacobian(&belief.mean, map.cell_center(cell));
            if d < SINGULAR_DISTANCE || (max_range && d > spec.z_max - res) {
                continue;
            }
            let n = map.hit_count(cell);
            let (w_occ, w_free) = match (is_hit, params.pass_cell_weighting) {
                (false, PassCellWeighting::ForcedOne) => (1.0, 1.0),
                _ => (
                    temper_weight(n, true, params.n_max),
                    temper_weight(n, false, params.n_max),
                ),
            };
            let p = tempered_bayes(
                map.prob(cell),
                z - d,
                projected_variance(&belief.cov, &h, true, spec),
                projected_variance(&belief.cov, &h, false, spec),
                w_occ,
                w_free,
            );
            map.set_prob(cell, p);
            stats.cell_updates += 1;
        }
    }
    stats
}

/// Log-odds inverse sensor model: hit cell `+l_occ`, pass cells `+l_free`.
pub fn inverse_update_scan(
    map: &mut OccupancyGrid,
    scan: &BeamScan,
    pose_mean: &Pose,
    params: &MapUpdateParams,
    spec: &SensorSpec,
) -> ScanUpdateStats {
    let mut stats = ScanUpdateStats::default();
    let origin = Point2::new(pose_mean.x, pose_mean.y);
    if !map.contains_point(origin) {
        return stats;
    }
    let mut rays = RaySets::default();
    for (_, z, a) in scan.beams() {
        if traverse_ray_into(map, origin, pose_mean.z + a, z, spec.z_max, &mut rays).is_err() {
            continue;
        }
        stats.beams += 1;
        for (cell, is_hit) in rays.cells() {
            let inc = if is_hit { params.l_occ } else { params.l_free };
            add_log_odds(map, cell, inc);
            stats.cell_updates += 1;
        }
        if let Some(hit) = rays.hit_cell {
            map.record_hit(hit, params.n_max);
            stats.hit_cells += 1;
        }
    }
    stats
}

fn add_log_odds(map: &mut OccupancyGrid, cell: CellIndex, inc: f64) {
    let p = map.prob(cell);
    map.set_prob(cell, logistic(logit(p) + inc));
}
