//! Browser bindings for the static demo page in `www/`.
//!
//! Three operations: entropy curves per family and alpha, a single scan fused
//! under a scaled pose covariance, and a step-through exploration run.

use coupled_explore::entropy::{cell_entropy, EntropyFamily, EntropySpec};
use coupled_explore::experiment::{explorer_config, load_truth, sample_start, Ablation, MapSource, RunConfig};
use coupled_explore::explore::{extract_frontiers, ExploreStatus, Explorer};
use coupled_explore::grid::{OccupancyGrid, P_MIN};
use coupled_explore::localization::PoseBelief;
use coupled_explore::mapping::{logit, tbayes_update_scan};
use coupled_explore::sensor::{predict_scan, BeamScan, Pose, SensorSpec};
use coupled_explore::sim::SimWorld;
use nalgebra::{Matrix3, Vector3};
use wasm_bindgen::prelude::*;

/// Probabilities at which [`entropy_curve`] samples, `samples` points in
/// `[P_MIN, 1 − P_MIN]`.
#[wasm_bindgen]
pub fn curve_probs(samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n)
        .map(|k| P_MIN + (1.0 - 2.0 * P_MIN) * k as f64 / (n - 1) as f64)
        .collect()
}

fn curve(family: &str, alpha: f64, samples: usize) -> Result<Vec<f64>, String> {
    let family: EntropyFamily = family.parse().map_err(|e| format!("{e}"))?;
    let spec = EntropySpec::new(family, alpha).map_err(|e| e.to_string())?;
    Ok(curve_probs(samples).into_iter().map(|p| cell_entropy(p, &spec)).collect())
}

/// Cell entropy (nats) over [`curve_probs`] for `shannon`, `renyi` or
/// `behavioral`.
#[wasm_bindgen]
pub fn entropy_curve(family: &str, alpha: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    curve(family, alpha, samples).map_err(|e| JsError::new(&e))
}

/// A room seen once from a fixed pose. The prior has the walls half-learned so
/// both hit and pass cells move visibly.
#[wasm_bindgen]
pub struct ScanScene {
    prior: OccupancyGrid,
    scan: BeamScan,
    pose: Pose,
    spec: SensorSpec,
    base_cov: Matrix3<f64>,
}

impl ScanScene {
    fn build() -> Self {
        let truth = load_truth(&MapSource::Fixture("corridor".into())).expect("bundled fixture");
        let spec = SensorSpec {
            n_beams: 180,
            ..SensorSpec::default()
        };
        let pose = sample_start(&truth, 3, 2.0, 0.2).expect("free start");
        let scan = predict_scan(&pose, &truth, &spec, 0.5).expect("pose inside the map");
        let mut prior = truth.unknown_like();
        for c in truth.cells().collect::<Vec<_>>() {
            if truth.is_occupied(c) {
                prior.set_prob(c, 0.7);
                prior.set_hit_count(c, 1);
            }
        }
        Self {
            prior,
            scan,
            pose,
            spec,
            base_cov: Matrix3::from_diagonal(&Vector3::new(0.0025, 0.0025, 0.0004)),
        }
    }

    fn fused(&self, scale: f64) -> OccupancyGrid {
        let mut map = self.prior.clone();
        let belief = PoseBelief::new(self.pose, self.base_cov * scale.max(0.0));
        tbayes_update_scan(&mut map, &self.scan, &belief, &Default::default(), &self.spec);
        map
    }
}

#[wasm_bindgen]
impl ScanScene {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Self {
        Self::build()
    }

    pub fn width(&self) -> usize {
        self.prior.width()
    }

    pub fn height(&self) -> usize {
        self.prior.height()
    }

    pub fn resolution(&self) -> f64 {
        self.prior.resolution()
    }

    /// Robot pose `[x, y, heading]`.
    pub fn pose(&self) -> Vec<f64> {
        vec![self.pose.x, self.pose.y, self.pose.z]
    }

    /// Occupancy after one scan with the pose covariance multiplied by
    /// `scale`, row-major with row 0 at the lowest y.
    pub fn posterior(&self, scale: f64) -> Vec<f64> {
        self.fused(scale).probs().to_vec()
    }

    /// Signed change in log-odds per cell for the same update.
    pub fn log_odds_change(&self, scale: f64) -> Vec<f64> {
        let post = self.fused(scale);
        self.prior
            .probs()
            .iter()
            .zip(post.probs())
            .map(|(&a, &b)| logit(b) - logit(a))
            .collect()
    }
}

impl Default for ScanScene {
    fn default() -> Self {
        Self::build()
    }
}

/// A seeded exploration run advanced a few control steps at a time.
#[wasm_bindgen]
pub struct Exploration {
    sim: SimWorld,
    explorer: Explorer,
    decisions: usize,
}

impl Exploration {
    fn build(fixture: &str, ablation: &str, alpha: f64, seed: u64) -> Result<Self, String> {
        let mut cfg = RunConfig {
            map: MapSource::Fixture(fixture.into()),
            ablation: ablation.parse::<Ablation>()?,
            ..RunConfig::default()
        };
        cfg.decision.entropy = EntropySpec::behavioral(alpha).map_err(|e| e.to_string())?;
        let truth = load_truth(&cfg.map).map_err(|e| e.to_string())?;
        let start = sample_start(&truth, seed, cfg.start_clearance, cfg.sim.robot_radius)
            .ok_or("no free start cell")?;
        let sim = SimWorld::new(truth.clone(), start, cfg.sim.clone(), cfg.sensor.clone(), seed)
            .map_err(|e| e.to_string())?;
        let cov = Matrix3::from_diagonal(&Vector3::new(
            cfg.init_pos_std.powi(2),
            cfg.init_pos_std.powi(2),
            cfg.init_heading_std.powi(2),
        ));
        let explorer = Explorer::new(explorer_config(&cfg), PoseBelief::new(start, cov), truth.unknown_like());
        Ok(Self {
            sim,
            explorer,
            decisions: 0,
        })
    }

    fn advance(&mut self, steps: usize) -> Result<bool, String> {
        for _ in 0..steps {
            let ev = self.explorer.explore_step(&mut self.sim).map_err(|e| e.to_string())?;
            if ev.decision.is_some_and(|d| d.chosen.is_some()) {
                self.decisions += 1;
            }
            if ev.status == ExploreStatus::Complete {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[wasm_bindgen]
impl Exploration {
    /// `fixture` is corridor, rooms or loop; `ablation` A1..A5 or B1..B3;
    /// `alpha` parameterizes the behavioral entropy used for decisions.
    #[wasm_bindgen(constructor)]
    pub fn new(fixture: &str, ablation: &str, alpha: f64, seed: u64) -> Result<Exploration, JsError> {
        Self::build(fixture, ablation, alpha, seed).map_err(|e| JsError::new(&e))
    }

    /// Run up to `steps` control periods; true once exploration is complete.
    pub fn step(&mut self, steps: usize) -> Result<bool, JsError> {
        self.advance(steps).map_err(|e| JsError::new(&e))
    }

    pub fn width(&self) -> usize {
        self.explorer.map().width()
    }

    pub fn height(&self) -> usize {
        self.explorer.map().height()
    }

    pub fn resolution(&self) -> f64 {
        self.explorer.map().resolution()
    }

    pub fn steps(&self) -> u64 {
        self.sim.step_count()
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    /// Estimated occupancy, row-major with row 0 at the lowest y.
    pub fn map(&self) -> Vec<f64> {
        self.explorer.map().probs().to_vec()
    }

    /// Ground-truth occupancy in the same layout.
    pub fn truth(&self) -> Vec<f64> {
        self.sim.truth().probs().to_vec()
    }

    pub fn true_pose(&self) -> Vec<f64> {
        let p = self.sim.true_pose();
        vec![p.x, p.y, p.z]
    }

    /// `[x, y, heading, σxx, σxy, σyy]` of the pose belief.
    pub fn belief(&self) -> Vec<f64> {
        let b = self.explorer.belief();
        vec![b.mean.x, b.mean.y, b.mean.z, b.cov[(0, 0)], b.cov[(0, 1)], b.cov[(1, 1)]]
    }

    /// Flat `[x0, y0, x1, y1, ...]` of frontier goal points in the current map.
    pub fn frontier_goals(&self) -> Vec<f64> {
        let map = self.explorer.map();
        extract_frontiers(map, &self.explorer.config().decision)
            .iter()
            .flat_map(|f| {
                let p = map.cell_center(f.goal_cell);
                [p.x, p.y]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_have_requested_length_and_peak_at_half() {
        let h = curve("behavioral", 1.0, 101).unwrap();
        assert_eq!(h.len(), 101);
        assert!((h[50] - std::f64::consts::LN_2).abs() < 1e-9);
        assert!(curve("nonsense", 1.0, 10).is_err());
        assert!(curve("renyi", -1.0, 10).is_err());
    }

    #[test]
    fn larger_covariance_moves_the_map_differently() {
        let s = ScanScene::new();
        let (a, b) = (s.log_odds_change(1.0), s.log_odds_change(100.0));
        assert_eq!(a.len(), s.width() * s.height());
        assert!(a.iter().any(|&x| x != 0.0));
        assert_ne!(a, b);
    }

    #[test]
    fn exploration_advances_and_reports_state() {
        let mut e = Exploration::build("corridor", "A5", 1.0, 0).unwrap();
        e.advance(60).unwrap();
        assert_eq!(e.steps(), 60);
        assert_eq!(e.map().len(), e.width() * e.height());
        assert_eq!(e.belief().len(), 6);
        assert!(e.decisions() >= 1);
        assert!(Exploration::build("corridor", "Z9", 1.0, 0).is_err());
    }
}
