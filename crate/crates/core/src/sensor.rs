//! Multi-beam range sensor: the two-variance beam likelihood, simulated scans
//! against ground truth and predicted scans against an estimated map.

use std::f64::consts::{PI, TAU};

use nalgebra::{Point2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{cast_ray, GridError, OccupancyGrid};

/// Robot pose `(x, y, theta)` in meters and radians.
pub type Pose = Vector3<f64>;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("invalid sensor spec: {0}")]
    InvalidSpec(String),
    #[error("pose ({x:.3}, {y:.3}) lies inside an occupied cell")]
    PoseInObstacle { x: f64, y: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub n_beams: usize,
    /// Field of view in radians; `2π` for a full ring.
    pub fov: f64,
    pub z_max: f64,
    /// Beam variance (m²) when the cell is occupied.
    pub r_occ: f64,
    /// Beam variance (m²) when the cell is free.
    pub r_free: f64,
    pub beam_noise_std: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            n_beams: 360,
            fov: TAU,
            z_max: 10.0,
            r_occ: 0.39 * 0.39,
            r_free: 3.0 * 3.0,
            beam_noise_std: 0.01,
        }
    }
}

impl SensorSpec {
    /// Hard errors for unusable specs; a warning when the free-space variance
    /// falls outside `[5, 15]` times the occupied one.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.n_beams == 0 {
            return Err(SensorError::InvalidSpec("n_beams must be at least 1".into()));
        }
        if !(self.z_max > 0.0) {
            return Err(SensorError::InvalidSpec("z_max must be positive".into()));
        }
        if !(self.fov > 0.0 && self.fov <= TAU + 1e-12) {
            return Err(SensorError::InvalidSpec("fov must lie in (0, 2π]".into()));
        }
        if !(self.r_occ > 0.0) {
            return Err(SensorError::InvalidSpec("r_occ must be positive".into()));
        }
        if !(self.r_free > self.r_occ) {
            return Err(SensorError::InvalidSpec(
                "r_free must exceed r_occ".into(),
            ));
        }
        if !(self.beam_noise_std >= 0.0) {
            return Err(SensorError::InvalidSpec("beam_noise_std must be non-negative".into()));
        }
        let ratio = self.r_free / self.r_occ;
        if !(5.0..=15.0).contains(&ratio) {
            log::warn!("r_free/r_occ = {ratio:.2} lies outside the recommended [5, 15] band");
        }
        Ok(())
    }

    /// Beam bearings in the sensor frame, strictly increasing. A full ring
    /// starts at `-π` and does not repeat the endpoint.
    pub fn beam_angles(&self) -> Vec<f64> {
        let n = self.n_beams;
        if (self.fov - TAU).abs() < 1e-12 {
            (0..n).map(|k| -PI + k as f64 * TAU / n as f64).collect()
        } else if n == 1 {
            vec![0.0]
        } else {
            let step = self.fov / (n - 1) as f64;
            (0..n).map(|k| -0.5 * self.fov + k as f64 * step).collect()
        }
    }
}

/// One multi-beam range measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamScan {
    pub ranges: Vec<f64>,
    pub angles: Vec<f64>,
    pub z_max: f64,
    pub step: u64,
}

impl BeamScan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// True when beam `k` returned no obstacle.
    pub fn is_max_range(&self, k: usize) -> bool {
        self.ranges[k] >= self.z_max
    }

    pub fn beams(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.ranges
            .iter()
            .zip(&self.angles)
            .enumerate()
            .map(|(k, (&r, &a))| (k, r, a))
    }

    /// Copy keeping every `stride`-th beam.
    pub fn decimated(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        Self {
            ranges: self.ranges.iter().step_by(stride).copied().collect(),
            angles: self.angles.iter().step_by(stride).copied().collect(),
            z_max: self.z_max,
            step: self.step,
        }
    }
}

#[inline]
pub fn gaussian_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (TAU * var).sqrt()
}

#[inline]
pub fn gaussian_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * (TAU * var).ln()
}

/// Beam likelihood of reading `z` given the expected range to a cell and the
/// cell's occupancy: `N(z; expected, r_occ)` or `N(z; expected, r_free)`.
pub fn dvl_likelihood(z: f64, expected: f64, occupied: bool, spec: &SensorSpec) -> f64 {
    let var = if occupied { spec.r_occ } else { spec.r_free };
    gaussian_density(z, expected, var)
}

/// Expected range `h(x, m^i)`: Euclidean distance from the pose to a cell center.
#[inline]
pub fn expected_range(pose: &Pose, center: Point2<f64>) -> f64 {
    (pose.x - center.x).hypot(pose.y - center.y)
}

/// Ray-cast every beam against the ground truth (obstacle iff prob > 0.5) and
/// add zero-mean Gaussian noise to returns. Beams without a return read
/// exactly `z_max`.
pub fn simulate_scan<R: Rng + ?Sized>(
    true_pose: &Pose,
    truth: &OccupancyGrid,
    spec: &SensorSpec,
    rng: &mut R,
    step: u64,
) -> Result<BeamScan, SensorError> {
    let origin = Point2::new(true_pose.x, true_pose.y);
    let cell = truth.world_to_cell(origin)?;
    if truth.is_occupied(cell) {
        return Err(SensorError::PoseInObstacle {
            x: origin.x,
            y: origin.y,
        });
    }
    let noise = (spec.beam_noise_std > 0.0)
        .then(|| Normal::new(0.0, spec.beam_noise_std).expect("finite std"));
    let angles = spec.beam_angles();
    let mut ranges = Vec::with_capacity(angles.len());
    for &a in &angles {
        let hit = cast_ray(truth, origin, true_pose.z + a, spec.z_max, |c| truth.is_occupied(c))?;
        let z = match hit {
            Some(h) => {
                let n = noise.as_ref().map_or(0.0, |d| d.sample(rng));
                (h.range + n).clamp(0.0, spec.z_max)
            }
            None => spec.z_max,
        };
        ranges.push(z);
    }
    Ok(BeamScan {
        ranges,
        angles,
        z_max: spec.z_max,
        step,
    })
}

/// Noiseless scan against an estimated map. Cells at or above
/// `occ_threshold` block beams; everything else, unknown cells included, is
/// treated as traversable.
pub fn predict_scan(
    pose: &Pose,
    est_map: &OccupancyGrid,
    spec: &SensorSpec,
    occ_threshold: f64,
) -> Result<BeamScan, SensorError> {
    let origin = Point2::new(pose.x, pose.y);
    let angles = spec.beam_angles();
    let mut ranges = Vec::with_capacity(angles.len());
    for &a in &angles {
        let hit = cast_ray(est_map, origin, pose.z + a, spec.z_max, |c| {
            est_map.prob(c) >= occ_threshold
        })?;
        ranges.push(hit.map_or(spec.z_max, |h| h.range));
    }
    Ok(BeamScan {
        ranges,
        angles,
        z_max: spec.z_max,
        step: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn room(w: usize, h: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::filled(w, h, 0.2, Point2::origin(), 0.0).unwrap();
        for c in 0..w {
            g.set_prob(CellIndex::new(0, c), 1.0);
            g.set_prob(CellIndex::new(h - 1, c), 1.0);
        }
        for r in 0..h {
            g.set_prob(CellIndex::new(r, 0), 1.0);
            g.set_prob(CellIndex::new(r, w - 1), 1.0);
        }
        g
    }

    #[test]
    fn dvl_peak_values() {
        let spec = SensorSpec::default();
        assert_relative_eq!(dvl_likelihood(3.0, 3.0, true, &spec), 1.0229, epsilon = 1e-4);
        assert_relative_eq!(
            dvl_likelihood(3.0, 3.0, true, &spec),
            1.0 / (TAU * 0.1521f64).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(dvl_likelihood(3.0, 3.0, false, &spec), 0.13298, epsilon = 1e-5);
        assert!(dvl_likelihood(1e3, 0.0, true, &spec) < 1e-300);
        assert!(dvl_likelihood(1e3, 0.0, false, &spec) < 1e-300);
    }

    #[test]
    fn occupied_likelihood_dominates_inside_crossover() {
        // N(r; Ro) >= N(r; Ru)  <=>  r² <= ln(Ru/Ro) / (1/Ro - 1/Ru)
        let spec = SensorSpec::default();
        let cross =
            ((spec.r_free / spec.r_occ).ln() / (1.0 / spec.r_occ - 1.0 / spec.r_free)).sqrt();
        for i in 0..=400 {
            let r = i as f64 * 0.005;
            let ratio = dvl_likelihood(r, 0.0, true, &spec) / dvl_likelihood(r, 0.0, false, &spec);
            if (r - cross).abs() > 1e-6 {
                assert_eq!(ratio >= 1.0, r <= cross, "r = {r}");
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SensorSpec::default().validate().is_ok());
        let bad = SensorSpec {
            r_free: 0.1,
            ..SensorSpec::default()
        };
        assert!(bad.validate().is_err());
        let zero = SensorSpec {
            n_beams: 0,
            ..SensorSpec::default()
        };
        assert!(zero.validate().is_err());
        // outside the recommended band only warns
        let wide = SensorSpec {
            r_free: 100.0,
            ..SensorSpec::default()
        };
        assert!(wide.validate().is_ok());
    }

    #[test]
    fn beam_angles_strictly_increasing() {
        for spec in [
            SensorSpec::default(),
            SensorSpec {
                n_beams: 7,
                fov: 1.5,
                ..SensorSpec::default()
            },
        ] {
            let a = spec.beam_angles();
            assert_eq!(a.len(), spec.n_beams);
            assert!(a.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn empty_map_reads_max_range() {
        let g = OccupancyGrid::filled(200, 200, 0.2, Point2::origin(), 0.0).unwrap();
        let spec = SensorSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = simulate_scan(&Pose::new(20.0, 20.0, 0.3), &g, &spec, &mut rng, 0).unwrap();
        assert!(scan.ranges.iter().all(|&z| z == spec.z_max));
    }

    #[test]
    fn wall_dead_ahead() {
        let mut g = OccupancyGrid::filled(100, 20, 0.2, Point2::origin(), 0.0).unwrap();
        for r in 0..20 {
            g.set_prob(CellIndex::new(r, 30), 1.0);
        }
        let start = g.cell_center(CellIndex::new(10, 5));
        let spec = SensorSpec {
            beam_noise_std: 0.0,
            n_beams: 4,
            ..SensorSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = Pose::new(start.x, start.y, 0.0);
        let scan = simulate_scan(&pose, &g, &spec, &mut rng, 0).unwrap();
        // beam 2 of a 4-beam ring points along +x
        assert_eq!(scan.angles[2], 0.0);
        assert!((scan.ranges[2] - 5.0).abs() <= 0.1 + 1e-9);
    }

    #[test]
    fn pose_in_wall_is_an_error() {
        let g = room(20, 20);
        let spec = SensorSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = g.cell_center(CellIndex::new(0, 5));
        let r = simulate_scan(&Pose::new(c.x, c.y, 0.0), &g, &spec, &mut rng, 0);
        assert!(matches!(r, Err(SensorError::PoseInObstacle { .. })));
    }

    #[test]
    fn seeded_scans_are_reproducible() {
        let g = room(40, 30);
        let spec = SensorSpec::default();
        let pose = Pose::new(3.1, 2.7, 0.4);
        let a = simulate_scan(&pose, &g, &spec, &mut ChaCha8Rng::seed_from_u64(9), 3).unwrap();
        let b = simulate_scan(&pose, &g, &spec, &mut ChaCha8Rng::seed_from_u64(9), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn beam_noise_statistics() {
        // 10^5 beams against a flat wall: sample std within 5% of the spec.
        let mut g = OccupancyGrid::filled(100, 40, 0.2, Point2::origin(), 0.0).unwrap();
        for r in 0..40 {
            g.set_prob(CellIndex::new(r, 50), 1.0);
        }
        let spec = SensorSpec {
            n_beams: 1,
            fov: 0.1,
            ..SensorSpec::default()
        };
        let c = g.cell_center(CellIndex::new(20, 20));
        let pose = Pose::new(c.x, c.y, 0.0);
        let clean = simulate_scan(&pose, &g, &SensorSpec { beam_noise_std: 0.0, ..spec.clone() },
                                  &mut ChaCha8Rng::seed_from_u64(0), 0).unwrap().ranges[0];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let z = simulate_scan(&pose, &g, &spec, &mut rng, 0).unwrap().ranges[0] - clean;
            sum += z;
            sum2 += z * z;
        }
        let mean = sum / n as f64;
        let std = (sum2 / n as f64 - mean * mean).sqrt();
        assert!((std - spec.beam_noise_std).abs() < 0.05 * spec.beam_noise_std, "std {std}");
    }

    #[test]
    fn predict_scan_on_unknown_map_is_max_range() {
        let g = OccupancyGrid::new(100, 100, 0.2, Point2::origin()).unwrap();
        let spec = SensorSpec::default();
        let scan = predict_scan(&Pose::new(10.0, 10.0, 0.0), &g, &spec, 0.65).unwrap();
        assert!(scan.ranges.iter().all(|&z| z == spec.z_max));
    }

    #[test]
    fn predict_scan_threshold_one_sees_nothing() {
        let g = room(60, 60);
        let spec = SensorSpec::default();
        let scan = predict_scan(&Pose::new(6.0, 6.0, 0.0), &g, &spec, 1.0).unwrap();
        assert!(scan.ranges.iter().all(|&z| z == spec.z_max));
    }

    #[test]
    fn predict_scan_matches_noiseless_simulation_on_truth() {
        let mut g = room(60, 45);
        for r in 10..30 {
            g.set_prob(CellIndex::new(r, 33), 1.0);
        }
        let spec = SensorSpec {
            beam_noise_std: 0.0,
            ..SensorSpec::default()
        };
        let pose = Pose::new(3.3, 4.1, 0.7);
        let sim = simulate_scan(&pose, &g, &spec, &mut ChaCha8Rng::seed_from_u64(0), 0).unwrap();
        let pred = predict_scan(&pose, &g.binarized(0.5), &spec, 0.65).unwrap();
        assert_eq!(sim.ranges, pred.ranges);
    }
}
