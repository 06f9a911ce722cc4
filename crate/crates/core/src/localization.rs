//! Gaussian pose filter: unicycle prediction, the map-coupled range update in
//! information form, and a 1-D heading search against the estimated map.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point2, RowVector3, Vector3};
use serde::{Deserialize, Serialize};

use crate::grid::{cast_ray, traverse_ray_into, OccupancyGrid, RaySets};
use crate::sensor::{gaussian_log_density, BeamScan, Pose, SensorSpec};

const JITTER: f64 = 1e-9;

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseBelief {
    pub mean: Pose,
    pub cov: Matrix3<f64>,
}

impl PoseBelief {
    pub fn new(mean: Pose, cov: Matrix3<f64>) -> Self {
        let mut b = Self { mean, cov };
        b.normalize();
        b
    }

    pub fn certain(mean: Pose) -> Self {
        Self::new(mean, Matrix3::zeros())
    }

    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.mean.x, self.mean.y)
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }

    fn normalize(&mut self) {
        self.mean.z = wrap_angle(self.mean.z);
        self.cov = 0.5 * (self.cov + self.cov.transpose());
    }
}

/// Velocity command held for `dt` seconds, with additive process noise `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionInput {
    pub v: f64,
    pub omega: f64,
    pub dt: f64,
    pub q: Matrix3<f64>,
}

impl MotionInput {
    pub fn new(v: f64, omega: f64, dt: f64) -> Self {
        Self {
            v,
            omega,
            dt,
            q: Matrix3::zeros(),
        }
    }

    /// Process noise from velocity noise: position std `trans_std·dt` per
    /// axis, heading std `rot_std·dt`.
    pub fn with_velocity_noise(mut self, trans_std: f64, rot_std: f64) -> Self {
        let s = trans_std * self.dt;
        let r = rot_std * self.dt;
        self.q = Matrix3::from_diagonal(&Vector3::new(s * s, s * s, r * r));
        self
    }
}

/// Exact unicycle step.
pub fn unicycle(pose: &Pose, v: f64, omega: f64, dt: f64) -> Pose {
    Pose::new(
        pose.x + v * pose.z.cos() * dt,
        pose.y + v * pose.z.sin() * dt,
        wrap_angle(pose.z + omega * dt),
    )
}

pub fn predict(belief: &PoseBelief, u: &MotionInput) -> PoseBelief {
    let th = belief.mean.z;
    let mut f = Matrix3::identity();
    f[(0, 2)] = -u.v * th.sin() * u.dt;
    f[(1, 2)] = u.v * th.cos() * u.dt;
    PoseBelief::new(
        unicycle(&belief.mean, u.v, u.omega, u.dt),
        f * belief.cov * f.transpose() + u.q,
    )
}

/// How a cell's occupancy probability turns into a range variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RangeVariance {
    /// `p²·R_o + (1−p)²·R_u`
    #[default]
    Coupled,
    /// Variance of the two-component mixture with a shared mean: `p·R_o + (1−p)·R_u`.
    MomentMatched,
}

pub fn coupled_r(p_occ: f64, spec: &SensorSpec) -> f64 {
    p_occ * p_occ * spec.r_occ + (1.0 - p_occ) * (1.0 - p_occ) * spec.r_free
}

pub fn moment_matched_r(p_occ: f64, spec: &SensorSpec) -> f64 {
    p_occ * spec.r_occ + (1.0 - p_occ) * spec.r_free
}

impl RangeVariance {
    pub fn variance(self, p_occ: f64, spec: &SensorSpec) -> f64 {
        match self {
            Self::Coupled => coupled_r(p_occ, spec),
            Self::MomentMatched => moment_matched_r(p_occ, spec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalizationMode {
    /// Prediction only.
    OdomOnly,
    /// Map treated as certain: hit cells at or above the occupancy threshold
    /// are used with the occupied-cell variance, the rest ignored.
    Decoupled,
    /// Map confidence enters each hit cell's variance.
    Coupled,
}

/// Which map cell a beam is compared against in the range update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HitAssociation {
    /// First cell at or above the occupancy threshold along the beam from the
    /// predicted pose, kept when its range is within a 3-sigma gate of the
    /// measurement.
    #[default]
    RayCast,
    /// The cell holding the measured endpoint. Its residual is sub-cell
    /// quantization only, so it carries no information about pose error.
    Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizerConfig {
    pub mode: LocalizationMode,
    pub gamma: f64,
    pub variance: RangeVariance,
    pub occ_threshold: f64,
    pub association: HitAssociation,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            mode: LocalizationMode::Coupled,
            gamma: 1.2,
            variance: RangeVariance::Coupled,
            occ_threshold: 0.65,
            association: HitAssociation::RayCast,
        }
    }
}

/// Range Jacobian `∇‖x − c‖` at `pose`; zero heading column.
pub fn range_jacobian(pose: &Pose, center: Point2<f64>) -> (RowVector3<f64>, f64) {
    let dx = pose.x - center.x;
    let dy = pose.y - center.y;
    let d = dx.hypot(dy);
    if d == 0.0 {
        return (RowVector3::zeros(), 0.0);
    }
    (RowVector3::new(dx / d, dy / d, 0.0), d)
}

/// One hit-cell term of the information update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitTerm {
    pub jacobian: RowVector3<f64>,
    pub residual: f64,
    pub variance: f64,
}

/// Hit-cell terms of a scan in beam order. Cells closer than half a cell to
/// the linearization point are skipped.
pub fn hit_terms(
    mean: &Pose,
    scan: &BeamScan,
    map_prior: &OccupancyGrid,
    spec: &SensorSpec,
    cfg: &LocalizerConfig,
) -> Vec<HitTerm> {
    hit_terms_gated(mean, &Matrix3::zeros(), scan, map_prior, spec, cfg)
}

/// As [`hit_terms`], with the ray-cast gate widened by the projected pose
/// covariance `cov`.
pub fn hit_terms_gated(
    mean: &Pose,
    cov: &Matrix3<f64>,
    scan: &BeamScan,
    map_prior: &OccupancyGrid,
    spec: &SensorSpec,
    cfg: &LocalizerConfig,
) -> Vec<HitTerm> {
    let origin = Point2::new(mean.x, mean.y);
    if cfg.mode == LocalizationMode::OdomOnly || !map_prior.contains_point(origin) {
        return Vec::new();
    }
    let mut rays = RaySets::default();
    let mut terms = Vec::new();
    for (k, z, a) in scan.beams() {
        if scan.is_max_range(k) {
            continue;
        }
        let cell = match cfg.association {
            HitAssociation::Endpoint => {
                if traverse_ray_into(map_prior, origin, mean.z + a, z, spec.z_max, &mut rays).is_err() {
                    continue;
                }
                match rays.hit_cell {
                    Some(c) => c,
                    None => continue,
                }
            }
            HitAssociation::RayCast => {
                let hit = cast_ray(map_prior, origin, mean.z + a, spec.z_max, |c| {
                    map_prior.prob(c) >= cfg.occ_threshold
                });
                match hit {
                    Ok(Some(h)) => h.cell,
                    _ => continue,
                }
            }
        };
        let p = map_prior.prob(cell);
        let variance = match cfg.mode {
            LocalizationMode::OdomOnly => continue,
            LocalizationMode::Decoupled if p < cfg.occ_threshold => continue,
            LocalizationMode::Decoupled => spec.r_occ,
            LocalizationMode::Coupled => cfg.variance.variance(p, spec),
        };
        let (jacobian, d) = range_jacobian(mean, map_prior.cell_center(cell));
        if d < 0.5 * map_prior.resolution() {
            continue;
        }
        let residual = z - d;
        if cfg.association == HitAssociation::RayCast {
            let spread = (jacobian * cov * jacobian.transpose())[(0, 0)];
            if residual.abs() > 3.0 * (spec.r_occ + spread).sqrt() {
                continue;
            }
        }
        terms.push(HitTerm {
            jacobian,
            residual,
            variance,
        });
    }
    terms
}

/// Fuse hit-cell terms into the predicted belief with the `γ/N_h` tempering.
pub fn fuse_terms(belief_pred: &PoseBelief, terms: &[HitTerm], gamma: f64) -> PoseBelief {
    if terms.is_empty() {
        return belief_pred.clone();
    }
    let scale = gamma / terms.len() as f64;
    let mut info = Matrix3::zeros();
    let mut vec = Vector3::zeros();
    for t in terms {
        let ht = t.jacobian.transpose();
        info += ht * t.jacobian * (scale / t.variance);
        vec += ht * (scale * t.residual / t.variance);
    }
    let prior_info = invert_spd(&belief_pred.cov);
    let cov = invert_spd(&(prior_info + info));
    // μ = Σ(Σ̄⁻¹μ̄ + Σ HᵀR⁻¹(z − h + Hμ̄)) rearranged around μ̄
    let mean = belief_pred.mean + cov * vec;
    PoseBelief::new(mean, cov)
}

fn invert_spd(m: &Matrix3<f64>) -> Matrix3<f64> {
    let sym = 0.5 * (m + m.transpose());
    sym.try_inverse()
        .or_else(|| (sym + Matrix3::identity() * JITTER).try_inverse())
        .unwrap_or_else(|| Matrix3::identity() / JITTER)
}

/// Coupled range update of a predicted belief against the predicted map.
pub fn update(
    belief_pred: &PoseBelief,
    scan: &BeamScan,
    map_prior: &OccupancyGrid,
    spec: &SensorSpec,
    gamma: f64,
) -> PoseBelief {
    let cfg = LocalizerConfig {
        gamma,
        ..LocalizerConfig::default()
    };
    update_with(belief_pred, scan, map_prior, spec, &cfg)
}

pub fn update_with(
    belief_pred: &PoseBelief,
    scan: &BeamScan,
    map_prior: &OccupancyGrid,
    spec: &SensorSpec,
    cfg: &LocalizerConfig,
) -> PoseBelief {
    if cfg.mode == LocalizationMode::OdomOnly {
        return belief_pred.clone();
    }
    let terms = hit_terms_gated(&belief_pred.mean, &belief_pred.cov, scan, map_prior, spec, cfg);
    fuse_terms(belief_pred, &terms, cfg.gamma)
}

pub const HEADING_SEARCH_HALF_WIDTH: f64 = 0.05;
pub const HEADING_SEARCH_SAMPLES: usize = 21;

/// Score of a heading offset: summed log range likelihood of each beam
/// against the range ray-cast in the map (obstacle iff `p ≥ occ_threshold`),
/// with the variance the hit cell's occupancy implies. A beam with no
/// predicted hit, or one worse than a 3-sigma miss on an occupied cell,
/// scores a constant outlier floor. Max-range beams are skipped.
pub fn heading_score(
    mean: &Pose,
    dtheta: f64,
    scan: &BeamScan,
    map_prior: &OccupancyGrid,
    spec: &SensorSpec,
    occ_threshold: f64,
) -> f64 {
    let origin = Point2::new(mean.x, mean.y);
    let floor = gaussian_log_density(3.0 * spec.r_occ.sqrt(), 0.0, spec.r_occ);
    let mut score = 0.0;
    for (k, z, a) in scan.beams() {
        if scan.is_max_range(k) {
            continue;
        }
        let hit = cast_ray(map_prior, origin, mean.z + dtheta + a, spec.z_max, |c| {
            map_prior.prob(c) >= occ_threshold
        });
        score += match hit {
            Ok(Some(h)) => gaussian_log_density(z, h.range, coupled_r(map_prior.prob(h.cell), spec)).max(floor),
            _ => floor,
        };
    }
    score
}

/// Grid search of a heading offset in `[-0.05, 0.05]` rad; ties go to the
/// offset with the smallest magnitude. Covariance is left unchanged.
pub fn heading_align(
    belief: &PoseBelief,
    scan: &BeamScan,
    map_prior: &OccupancyGrid,
    spec: &SensorSpec,
    occ_threshold: f64,
) -> PoseBelief {
    if !map_prior.contains_point(belief.position()) {
        return belief.clone();
    }
    let half = (HEADING_SEARCH_SAMPLES / 2) as i32;
    let step = HEADING_SEARCH_HALF_WIDTH / half as f64;
    // visit 0, -1, +1, -2, +2, ... so that strict improvement breaks ties toward 0
    let mut best = (0.0, f64::NEG_INFINITY);
    for j in 0..HEADING_SEARCH_SAMPLES as i32 {
        let m = (j + 1) / 2;
        let idx = if j % 2 == 1 { -m } else { m };
        let dth = idx as f64 * step;
        let s = heading_score(&belief.mean, dth, scan, map_prior, spec, occ_threshold);
        if s > best.1 + 1e-9 * s.abs().max(1.0) {
            best = (dth, s);
        }
    }
    let mut mean = belief.mean;
    mean.z += best.0;
    PoseBelief::new(mean, belief.cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;
    use crate::sensor::simulate_scan;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn room(w: usize, h: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::filled(w, h, 0.2, Point2::origin(), crate::grid::P_MIN).unwrap();
        for c in 0..w {
            g.set_prob(CellIndex::new(0, c), 1.0);
            g.set_prob(CellIndex::new(h - 1, c), 1.0);
        }
        for r in 0..h {
            g.set_prob(CellIndex::new(r, 0), 1.0);
            g.set_prob(CellIndex::new(r, w - 1), 1.0);
        }
        for r in 5..15 {
            g.set_prob(CellIndex::new(r, w / 3), 1.0);
        }
        g
    }

    #[test]
    fn coupled_r_spot_values() {
        let spec = SensorSpec::default();
        assert_eq!(coupled_r(1.0, &spec), spec.r_occ);
        assert_eq!(coupled_r(0.0, &spec), spec.r_free);
        assert!((coupled_r(0.5, &spec) - 2.288025).abs() < 1e-9);
        assert!((moment_matched_r(0.5, &spec) - 0.5 * (0.1521 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.1), 0.1);
    }

    #[test]
    fn predict_identity_and_straight_line() {
        let b = PoseBelief::new(Pose::new(1.0, 2.0, 0.3), Matrix3::identity() * 0.01);
        assert_eq!(predict(&b, &MotionInput::new(0.0, 0.0, 0.1)), b);
        let b0 = PoseBelief::certain(Pose::new(0.0, 0.0, 0.0));
        let b1 = predict(&b0, &MotionInput::new(1.0, 0.0, 1.0));
        assert_eq!(b1.mean.x, 1.0);
        assert_eq!(b1.mean.y, 0.0);
    }

    #[test]
    fn predict_matches_particle_propagation() {
        let mean = Pose::new(1.0, -2.0, 0.4);
        let cov = Matrix3::new(0.02, 0.005, 0.001, 0.005, 0.03, -0.002, 0.001, -0.002, 0.004);
        let u = MotionInput::new(0.8, 0.3, 0.5).with_velocity_noise(0.05, 0.02);
        let pred = predict(&PoseBelief::new(mean, cov), &u);

        let chol = cov.cholesky().unwrap().l();
        let qchol = u.q.map(|v: f64| v.sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n01 = Normal::new(0.0, 1.0).unwrap();
        let n = 100_000;
        let samples: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                let e = Vector3::from_fn(|_, _| n01.sample(&mut rng));
                let w = Vector3::from_fn(|_, _| n01.sample(&mut rng));
                let x = mean + chol * e;
                let mut y = unicycle(&x, u.v, u.omega, u.dt) + qchol * w;
                y.z = mean.z + u.omega * u.dt + wrap_angle(y.z - (mean.z + u.omega * u.dt));
                y
            })
            .collect();
        let m: Vector3<f64> = samples.iter().sum::<Vector3<f64>>() / n as f64;
        let c: Matrix3<f64> = samples
            .iter()
            .map(|s| (s - m) * (s - m).transpose())
            .sum::<Matrix3<f64>>()
            / (n - 1) as f64;
        assert!((m - pred.mean).norm() / pred.mean.norm() < 0.03);
        assert!((c - pred.cov).norm() / pred.cov.norm() < 0.03, "{c} vs {}", pred.cov);
        let noiseless = predict(&PoseBelief::new(mean, cov), &MotionInput::new(u.v, u.omega, u.dt));
        assert_relative_eq!(pred.trace() - noiseless.trace(), u.q.trace(), max_relative = 1e-9);
        assert!(pred.trace() > noiseless.trace());
    }

    #[test]
    fn no_hits_leaves_belief_unchanged() {
        let g = OccupancyGrid::new(100, 100, 0.2, Point2::origin()).unwrap();
        let spec = SensorSpec::default();
        let scan = BeamScan {
            ranges: vec![spec.z_max; 36],
            angles: (0..36).map(|k| k as f64 * 0.17 - PI).collect(),
            z_max: spec.z_max,
            step: 0,
        };
        let b = PoseBelief::new(Pose::new(10.0, 10.0, 0.0), Matrix3::identity() * 0.1);
        assert_eq!(update(&b, &scan, &g, &spec, 1.2), b);
    }

    #[test]
    fn scalar_reduction_example() {
        // prior var 1 along x, cell at 5 m, reading 4.9
        let spec = SensorSpec::default();
        let b = PoseBelief::new(Pose::zeros(), Matrix3::identity());
        let term = HitTerm {
            jacobian: RowVector3::new(-1.0, 0.0, 0.0),
            residual: 4.9 - 5.0,
            variance: coupled_r(1.0, &spec),
        };
        let post = fuse_terms(&b, &[term], 1.0);
        assert_relative_eq!(post.cov[(0, 0)], 1.0 / (1.0 + 1.0 / 0.1521), epsilon = 1e-12);
        assert_relative_eq!(post.cov[(0, 0)], 0.13202, epsilon = 1e-5);
        assert_relative_eq!(post.mean.x, 0.08679, epsilon = 1e-5);
        assert_relative_eq!(post.cov[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tempering_neutral_with_gamma_equal_hit_count() {
        let b = PoseBelief::new(Pose::new(0.3, -0.1, 0.2), Matrix3::identity() * 0.2);
        let h = RowVector3::new(0.6, -0.8, 0.0);
        let term = HitTerm {
            jacobian: h,
            residual: 0.07,
            variance: 0.3,
        };
        let post = fuse_terms(&b, &[term], 1.0);
        // Kalman form
        let s = (h * b.cov * h.transpose())[0] + 0.3;
        let k = b.cov * h.transpose() / s;
        let mean = b.mean + k * 0.07;
        let cov = (Matrix3::identity() - k * h) * b.cov;
        assert!((post.mean - mean).norm() < 1e-12);
        assert!((post.cov - cov).norm() < 1e-12);
    }

    fn scan_in_room(pose: Pose) -> (OccupancyGrid, BeamScan, SensorSpec) {
        let g = room(60, 40);
        let spec = SensorSpec {
            n_beams: 90,
            beam_noise_std: 0.0,
            ..SensorSpec::default()
        };
        let scan =
            simulate_scan(&pose, &g, &spec, &mut ChaCha8Rng::seed_from_u64(1), 0).unwrap();
        (g, scan, spec)
    }

    #[test]
    fn update_never_adds_uncertainty() {
        let pose = Pose::new(6.1, 3.9, 0.2);
        let (g, scan, spec) = scan_in_room(pose);
        let prior = Matrix3::new(0.05, 0.01, 0.0, 0.01, 0.04, 0.002, 0.0, 0.002, 0.01);
        let b = PoseBelief::new(pose + Vector3::new(0.05, -0.03, 0.0), prior);
        let post = update(&b, &scan, &g, &spec, 1.2);
        let diff = SymmetricEigen::new(b.cov - post.cov);
        assert!(diff.eigenvalues.min() > -1e-12);
        assert!(post.trace() < b.trace());
        assert!((post.cov - post.cov.transpose()).norm() < 1e-12);
    }

    #[test]
    fn confident_map_tightens_more() {
        let pose = Pose::new(6.1, 3.9, 0.2);
        let (g, scan, spec) = scan_in_room(pose);
        let b = PoseBelief::new(pose, Matrix3::identity() * 0.05);
        let mut prev = f64::INFINITY;
        for p in [0.5, 0.6, 0.7, 0.8, 0.9, 0.99] {
            let mut m = g.clone();
            for c in g.cells() {
                if g.is_occupied(c) {
                    m.set_prob(c, p);
                }
            }
            let t = update(&b, &scan, &m, &spec, 1.2).trace();
            assert!(t <= prev + 1e-15);
            prev = t;
        }
    }

    #[test]
    fn decoupled_ignores_uncertain_cells() {
        let pose = Pose::new(6.1, 3.9, 0.2);
        let (g, scan, spec) = scan_in_room(pose);
        let b = PoseBelief::new(pose, Matrix3::identity() * 0.05);
        let faint = g.cells().fold(g.clone(), |mut m, c| {
            if g.is_occupied(c) {
                m.set_prob(c, 0.6);
            }
            m
        });
        let cfg = LocalizerConfig {
            mode: LocalizationMode::Decoupled,
            ..LocalizerConfig::default()
        };
        assert_eq!(update_with(&b, &scan, &faint, &spec, &cfg), b);
        assert!(update_with(&b, &scan, &g, &spec, &cfg).trace() < b.trace());
        let odom = LocalizerConfig {
            mode: LocalizationMode::OdomOnly,
            ..LocalizerConfig::default()
        };
        assert_eq!(update_with(&b, &scan, &g, &spec, &odom), b);
    }

    #[test]
    fn heading_align_recovers_rotation() {
        let g = room(60, 40);
        let spec = SensorSpec {
            beam_noise_std: 0.0,
            ..SensorSpec::default()
        };
        let truth = Pose::new(5.3, 4.1, 0.4);
        let rotated = Pose::new(truth.x, truth.y, truth.z + 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scan_now = simulate_scan(&truth, &g, &spec, &mut rng, 0).unwrap();
        let scan_rot = simulate_scan(&rotated, &g, &spec, &mut rng, 0).unwrap();
        let b = PoseBelief::new(truth, Matrix3::identity() * 0.01);
        let same = heading_align(&b, &scan_now, &g, &spec, 0.65);
        assert_eq!(same.mean.z, truth.z);
        let shifted = heading_align(&b, &scan_rot, &g, &spec, 0.65);
        assert!((shifted.mean.z - truth.z - 0.03).abs() <= 0.005 + 1e-12);
        assert_eq!(shifted.cov, b.cov);

        let unknown = OccupancyGrid::new(60, 40, 0.2, Point2::origin()).unwrap();
        assert_eq!(heading_align(&b, &scan_rot, &unknown, &spec, 0.65).mean.z, truth.z);
    }

    #[test]
    fn filter_tracks_in_known_map() {
        let g = room(60, 40);
        let spec = SensorSpec {
            n_beams: 120,
            beam_noise_std: 0.0,
            ..SensorSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut truth = Pose::new(7.0, 4.0, 0.0);
        let mut b = PoseBelief::new(truth, Matrix3::identity() * 1e-4);
        let dt = 0.02;
        for step in 0..500u64 {
            let omega = if (step / 100) % 2 == 0 { 0.3 } else { -0.3 };
            truth = unicycle(&truth, 0.5, omega, dt);
            let v_odo = 0.5 + noise.sample(&mut rng);
            let u = MotionInput::new(v_odo, omega, dt).with_velocity_noise(0.05, 0.02);
            b = predict(&b, &u);
            if step % 5 == 0 {
                let scan = simulate_scan(&truth, &g, &spec, &mut rng, step).unwrap();
                b = update(&b, &scan, &g, &spec, 1.2);
            }
        }
        let err = (b.mean.x - truth.x).hypot(b.mean.y - truth.y);
        assert!(err < 2.0 * g.resolution(), "err {err}");
    }

    proptest! {
        #[test]
        fn fused_cov_is_symmetric_and_psd_shrinking(
            sx in 0.001f64..0.3, sy in 0.001f64..0.3, st in 0.0001f64..0.05,
            angles in prop::collection::vec(-PI..PI, 1..20),
            p in 0.01f64..0.99,
        ) {
            let spec = SensorSpec::default();
            let b = PoseBelief::new(Pose::zeros(), Matrix3::from_diagonal(&Vector3::new(sx, sy, st)));
            let terms: Vec<_> = angles.iter().map(|a| HitTerm {
                jacobian: RowVector3::new(a.cos(), a.sin(), 0.0),
                residual: 0.0,
                variance: coupled_r(p, &spec),
            }).collect();
            let post = fuse_terms(&b, &terms, 1.2);
            prop_assert!((post.cov - post.cov.transpose()).norm() < 1e-12);
            prop_assert!(SymmetricEigen::new(post.cov).eigenvalues.min() > 0.0);
            prop_assert!(SymmetricEigen::new(b.cov - post.cov).eigenvalues.min() > -1e-12);
        }
    }
}
