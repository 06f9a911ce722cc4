//! Ground-truth world: exact unicycle motion with collision truncation, noisy
//! odometry and range scans at the LiDAR rate.

pub mod metrics;

use nalgebra::Point2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::OccupancyGrid;
use crate::localization::{unicycle, wrap_angle, MotionInput};
use crate::sensor::{simulate_scan, BeamScan, Pose, SensorError, SensorSpec};

pub use metrics::{
    metrics_map_error, metrics_translation, metrics_uncertainty_reduction, MetricsError,
};

/// Odometry corruption. `trans_std` and `rot_std` perturb the commanded
/// velocities (m/s, rad/s); `heading_extra_std` (rad) is added to the heading
/// channel once per LiDAR step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub trans_std: f64,
    pub rot_std: f64,
    pub heading_extra_std: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            trans_std: 0.05,
            rot_std: 0.02,
            heading_extra_std: 0.01,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            trans_std: 0.0,
            rot_std: 0.0,
            heading_extra_std: 0.0,
        }
    }

    /// Odometry input carrying the process noise this corruption implies.
    /// On LiDAR steps the heading kick variance is added to the heading entry.
    pub fn motion(&self, v: f64, omega: f64, dt: f64, lidar_step: bool) -> MotionInput {
        let mut u = MotionInput::new(v, omega, dt).with_velocity_noise(self.trans_std, self.rot_std);
        if lidar_step {
            u.q[(2, 2)] += self.heading_extra_std * self.heading_extra_std;
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Simulation steps per LiDAR scan.
    pub lidar_every: u64,
    pub robot_radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub noise: NoiseSpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            lidar_every: 5,
            robot_radius: 0.15,
            v_max: 1.0,
            omega_max: 1.5,
            noise: NoiseSpec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub odometry: MotionInput,
    pub scan: Option<BeamScan>,
    pub collided: bool,
    /// Heading perturbation folded into `odometry` on this step (rad).
    pub heading_kick: f64,
}

#[derive(Debug, Clone)]
pub struct SimWorld {
    truth: OccupancyGrid,
    true_pose: Pose,
    rng: ChaCha8Rng,
    step: u64,
    cfg: SimConfig,
    sensor: SensorSpec,
}

const TRUTH_THRESHOLD: f64 = 0.5 + 1e-12;

impl SimWorld {
    pub fn new(
        truth: OccupancyGrid,
        start: Pose,
        cfg: SimConfig,
        sensor: SensorSpec,
        seed: u64,
    ) -> Result<Self, SensorError> {
        let world = Self {
            truth,
            true_pose: Pose::new(start.x, start.y, wrap_angle(start.z)),
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
            cfg,
            sensor,
        };
        if !world.is_free(&world.true_pose) {
            return Err(SensorError::PoseInObstacle {
                x: start.x,
                y: start.y,
            });
        }
        Ok(world)
    }

    pub fn truth(&self) -> &OccupancyGrid {
        &self.truth
    }

    pub fn true_pose(&self) -> Pose {
        self.true_pose
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn sensor(&self) -> &SensorSpec {
        &self.sensor
    }

    pub fn is_lidar_step(&self, step: u64) -> bool {
        step.is_multiple_of(self.cfg.lidar_every.max(1))
    }

    /// Clearance test: inside the grid and at least `robot_radius` from every
    /// occupied cell.
    pub fn is_free(&self, pose: &Pose) -> bool {
        let p = Point2::new(pose.x, pose.y);
        self.truth.contains_point(p)
            && self
                .truth
                .nearest_obstacle_within(p, self.cfg.robot_radius, TRUTH_THRESHOLD)
                .is_none()
    }

    /// Scan from the current true pose without advancing time.
    pub fn scan_now(&mut self) -> Result<BeamScan, SensorError> {
        simulate_scan(&self.true_pose, &self.truth, &self.sensor, &mut self.rng, self.step)
    }

    /// Advance one step. Commands are clipped to the speed limits; motion
    /// that would enter an obstacle is cut at contact.
    pub fn step_sim(&mut self, u: &MotionInput) -> Result<StepOutput, SensorError> {
        let v = u.v.clamp(-self.cfg.v_max, self.cfg.v_max);
        let omega = u.omega.clamp(-self.cfg.omega_max, self.cfg.omega_max);
        let dt = u.dt;
        let (pose, collided) = self.sweep(v, omega, dt);
        self.true_pose = pose;
        self.step += 1;

        let noise = &self.cfg.noise;
        let v_odo = v + sample(&mut self.rng, noise.trans_std);
        let mut omega_odo = omega + sample(&mut self.rng, noise.rot_std);
        let lidar = self.is_lidar_step(self.step);
        let mut heading_kick = 0.0;
        if lidar && noise.heading_extra_std > 0.0 {
            heading_kick = sample(&mut self.rng, noise.heading_extra_std);
            omega_odo += heading_kick / dt;
        }
        let odometry = MotionInput::new(v_odo, omega_odo, dt);
        let scan = if lidar { Some(self.scan_now()?) } else { None };
        Ok(StepOutput {
            odometry,
            scan,
            collided,
            heading_kick,
        })
    }

    /// Follow the arc in sub-steps short enough not to skip a wall; on the
    /// first blocked sub-step, bisect for the contact point.
    fn sweep(&self, v: f64, omega: f64, dt: f64) -> (Pose, bool) {
        let step_len = 0.25 * self.truth.resolution().min(self.cfg.robot_radius.max(1e-3));
        let n = ((v.abs() * dt / step_len).ceil() as usize).max(1);
        let mut good = 0.0;
        for k in 1..=n {
            let t = dt * k as f64 / n as f64;
            if !self.is_free(&unicycle(&self.true_pose, v, omega, t)) {
                let (mut lo, mut hi) = (good, t);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if self.is_free(&unicycle(&self.true_pose, v, omega, mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return (unicycle(&self.true_pose, v, omega, lo), true);
            }
            good = t;
        }
        (unicycle(&self.true_pose, v, omega, dt), false)
    }
}

fn sample(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;

    fn open(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::filled(w, h, 0.2, Point2::origin(), crate::grid::P_MIN).unwrap()
    }

    fn quiet() -> SimConfig {
        SimConfig {
            noise: NoiseSpec::none(),
            ..SimConfig::default()
        }
    }

    #[test]
    fn noiseless_odometry_echoes_command() {
        let mut w = SimWorld::new(open(50, 50), Pose::new(5.0, 5.0, 0.0), quiet(), SensorSpec::default(), 1).unwrap();
        let u = MotionInput::new(0.4, 0.1, 0.02);
        for _ in 0..10 {
            let out = w.step_sim(&u).unwrap();
            assert_eq!(out.odometry.v, 0.4);
            assert_eq!(out.odometry.omega, 0.1);
            assert!(!out.collided);
        }
    }

    #[test]
    fn wall_stops_motion_at_robot_radius() {
        let mut g = open(50, 50);
        for r in 0..50 {
            g.set_prob(CellIndex::new(r, 27), 1.0);
        }
        // cells are 0.2 m, so column 27 starts at x = 5.4
        let wall_x = 27.0 * 0.2;
        let cfg = quiet();
        let start = Pose::new(wall_x - 0.5, 5.1, 0.0);
        let mut w = SimWorld::new(g, start, cfg.clone(), SensorSpec::default(), 1).unwrap();
        let out = w.step_sim(&MotionInput::new(1.0, 0.0, 1.0)).unwrap();
        assert!(out.collided);
        let stop = w.true_pose().x;
        assert!((stop - (wall_x - cfg.robot_radius)).abs() < 1e-6, "{stop}");
        assert!(w.is_free(&w.true_pose()));
    }

    #[test]
    fn scans_arrive_at_lidar_rate() {
        let mut w = SimWorld::new(open(50, 50), Pose::new(5.0, 5.0, 0.0), quiet(), SensorSpec { n_beams: 8, ..SensorSpec::default() }, 1).unwrap();
        let got: Vec<bool> = (0..10)
            .map(|_| w.step_sim(&MotionInput::new(0.1, 0.0, 0.02)).unwrap().scan.is_some())
            .collect();
        assert_eq!(got.iter().filter(|&&s| s).count(), 2);
        assert!(got[4] && got[9]);
    }

    #[test]
    fn odometry_noise_statistics() {
        let cfg = SimConfig {
            noise: NoiseSpec {
                heading_extra_std: 0.0,
                ..NoiseSpec::default()
            },
            lidar_every: 1_000_000,
            ..SimConfig::default()
        };
        let mut w = SimWorld::new(open(400, 400), Pose::new(40.0, 40.0, 0.0), cfg, SensorSpec::default(), 7).unwrap();
        let n = 10_000;
        let errs: Vec<f64> = (0..n)
            .map(|k| {
                let omega = if k % 2 == 0 { 0.5 } else { -0.5 };
                let out = w.step_sim(&MotionInput::new(0.2, omega, 0.02)).unwrap();
                out.odometry.v - 0.2
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / n as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.05 * 0.05, "{}", var.sqrt());
    }

    #[test]
    fn same_seed_same_world() {
        let run = || {
            let mut w = SimWorld::new(open(60, 60), Pose::new(6.0, 6.0, 0.3), SimConfig::default(), SensorSpec { n_beams: 30, ..SensorSpec::default() }, 99).unwrap();
            let mut log = Vec::new();
            for _ in 0..50 {
                let out = w.step_sim(&MotionInput::new(0.5, 0.2, 0.02)).unwrap();
                log.push((w.true_pose(), out.odometry.v, out.scan.map(|s| s.ranges)));
            }
            log
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn start_in_wall_rejected() {
        let mut g = open(20, 20);
        g.set_prob(CellIndex::new(5, 5), 1.0);
        let c = g.cell_center(CellIndex::new(5, 5));
        assert!(SimWorld::new(g, Pose::new(c.x, c.y, 0.0), quiet(), SensorSpec::default(), 0).is_err());
    }
}
