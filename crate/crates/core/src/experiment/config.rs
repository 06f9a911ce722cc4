//! Run configuration in `key = value` form with `[section]` headers.
//!
//! ```text
//! [run]
//! map = fixture:corridor
//! seed_count = 5
//! ablation = A5
//! max_steps = 2000
//!
//! [entropy]
//! family = behavioral
//! alpha = 1.0
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use super::ablation::Ablation;
use crate::entropy::{EntropyFamily, EntropySpec};
use crate::explore::{DecisionConfig, DecisionMapSource, MapModel};
use crate::localization::{HitAssociation, LocalizationMode, RangeVariance};
use crate::mapping::{MapUpdateParams, PassCellWeighting};
use crate::sensor::SensorSpec;
use crate::sim::{NoiseSpec, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("unknown key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("bad value for `{key}`: `{value}` ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    /// Bundled floorplan by name.
    Fixture(String),
    /// PGM or ASCII file; pixels at or below mid-gray are walls.
    File(PathBuf),
}

impl FromStr for MapSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty map source".into());
        }
        Ok(match s.strip_prefix("fixture:") {
            Some(name) => MapSource::Fixture(name.to_string()),
            None => MapSource::File(PathBuf::from(s)),
        })
    }
}

impl std::fmt::Display for MapSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MapSource::Fixture(n) => write!(f, "fixture:{n}"),
            MapSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Localization, map and decision-map settings of a `custom` ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomModes {
    pub localization: LocalizationMode,
    pub map_model: MapModel,
    pub decision_map: DecisionMapSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: MapSource,
    pub seeds: Vec<u64>,
    pub ablation: Ablation,
    pub custom: CustomModes,
    pub max_steps: u64,
    pub output_dir: PathBuf,
    /// Map snapshot every this many decisions (0 disables).
    pub snapshot_every: usize,
    /// Minimum start clearance from walls (m).
    pub start_clearance: f64,
    pub init_pos_std: f64,
    pub init_heading_std: f64,
    pub heading_align: bool,
    pub range_variance: RangeVariance,
    pub hit_association: HitAssociation,
    pub map_params: MapUpdateParams,
    pub decision: DecisionConfig,
    pub sensor: SensorSpec,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: MapSource::Fixture("corridor".into()),
            seeds: (0..5).collect(),
            ablation: Ablation::A5,
            custom: CustomModes {
                localization: LocalizationMode::Coupled,
                map_model: MapModel::TBayes,
                decision_map: DecisionMapSource::Estimation,
            },
            max_steps: 2000,
            output_dir: PathBuf::from("runs/out"),
            snapshot_every: 10,
            start_clearance: 2.0,
            init_pos_std: 0.01,
            init_heading_std: 0.005,
            heading_align: true,
            range_variance: RangeVariance::Coupled,
            hit_association: HitAssociation::RayCast,
            map_params: MapUpdateParams::default(),
            decision: DecisionConfig::default(),
            sensor: SensorSpec::default(),
            sim: SimConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn parse_localization(key: &str, v: &str) -> Result<LocalizationMode, ConfigError> {
    match v.trim() {
        "odom_only" => Ok(LocalizationMode::OdomOnly),
        "decoupled" => Ok(LocalizationMode::Decoupled),
        "coupled" => Ok(LocalizationMode::Coupled),
        _ => Err(bad(key, v, "expected odom_only, decoupled or coupled")),
    }
}

fn parse_map_model(key: &str, v: &str) -> Result<MapModel, ConfigError> {
    match v.trim() {
        "tbayes" | "tbayesmap" => Ok(MapModel::TBayes),
        "inverse" => Ok(MapModel::Inverse),
        _ => Err(bad(key, v, "expected tbayes or inverse")),
    }
}

fn parse_decision_map(key: &str, v: &str) -> Result<DecisionMapSource, ConfigError> {
    match v.trim() {
        "estimation" => Ok(DecisionMapSource::Estimation),
        "inverse" => Ok(DecisionMapSource::InverseShadow),
        "certain_pose" => Ok(DecisionMapSource::CertainPoseShadow),
        _ => Err(bad(key, v, "expected estimation, inverse or certain_pose")),
    }
}

pub fn localization_name(m: LocalizationMode) -> &'static str {
    match m {
        LocalizationMode::OdomOnly => "odom_only",
        LocalizationMode::Decoupled => "decoupled",
        LocalizationMode::Coupled => "coupled",
    }
}

pub fn map_model_name(m: MapModel) -> &'static str {
    match m {
        MapModel::TBayes => "tbayes",
        MapModel::Inverse => "inverse",
    }
}

pub fn decision_map_name(m: DecisionMapSource) -> &'static str {
    match m {
        DecisionMapSource::Estimation => "estimation",
        DecisionMapSource::InverseShadow => "inverse",
        DecisionMapSource::CertainPoseShadow => "certain_pose",
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_ini_str(&text)
    }

    /// Parse a config; keys absent from the text keep their defaults.
    pub fn from_ini_str(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = RunConfig::default();
        let mut seed_count: Option<u64> = None;
        let mut seed_base = 0u64;
        let mut family = cfg.decision.entropy.family();
        let mut alpha = cfg.decision.entropy.alpha();
        for (section, props) in ini.iter() {
            let sec = section.unwrap_or("run");
            for (key, v) in props.iter() {
                let unknown = || ConfigError::UnknownKey {
                    section: sec.into(),
                    key: key.into(),
                };
                match (sec, key) {
                    ("run", "map") => cfg.map = parse(key, v)?,
                    ("run", "seeds") => {
                        cfg.seeds = v
                            .split(',')
                            .filter(|s| !s.trim().is_empty())
                            .map(|s| parse(key, s))
                            .collect::<Result<_, _>>()?
                    }
                    ("run", "seed_count") => seed_count = Some(parse(key, v)?),
                    ("run", "seed_base") => seed_base = parse(key, v)?,
                    ("run", "ablation") => cfg.ablation = parse(key, v)?,
                    ("run", "max_steps") => cfg.max_steps = parse(key, v)?,
                    ("run", "output_dir") => cfg.output_dir = PathBuf::from(v.trim()),
                    ("run", "snapshot_every") => cfg.snapshot_every = parse(key, v)?,
                    ("run", "start_clearance") => cfg.start_clearance = parse(key, v)?,
                    ("run", "init_pos_std") => cfg.init_pos_std = parse(key, v)?,
                    ("run", "init_heading_std") => cfg.init_heading_std = parse(key, v)?,
                    ("custom", "localization") => cfg.custom.localization = parse_localization(key, v)?,
                    ("custom", "map_model") => cfg.custom.map_model = parse_map_model(key, v)?,
                    ("custom", "decision_map") => cfg.custom.decision_map = parse_decision_map(key, v)?,
                    ("entropy", "family") => {
                        family = parse::<EntropyFamily>(key, v)?;
                    }
                    ("entropy", "alpha") => alpha = parse(key, v)?,
                    ("estimation", "gamma") => {
                        cfg.decision.gamma = parse(key, v)?;
                    }
                    ("estimation", "n_max") => cfg.map_params.n_max = parse(key, v)?,
                    ("estimation", "l_occ") => cfg.map_params.l_occ = parse(key, v)?,
                    ("estimation", "l_free") => cfg.map_params.l_free = parse(key, v)?,
                    ("estimation", "pass_cell_weighting") => {
                        cfg.map_params.pass_cell_weighting = match v.trim() {
                            "as_stored" => PassCellWeighting::AsStored,
                            "forced_one" => PassCellWeighting::ForcedOne,
                            _ => return Err(bad(key, v, "expected as_stored or forced_one")),
                        }
                    }
                    ("estimation", "range_variance") => {
                        cfg.range_variance = match v.trim() {
                            "coupled" => RangeVariance::Coupled,
                            "moment_matched" => RangeVariance::MomentMatched,
                            _ => return Err(bad(key, v, "expected coupled or moment_matched")),
                        }
                    }
                    ("estimation", "hit_association") => {
                        cfg.hit_association = match v.trim() {
                            "raycast" => HitAssociation::RayCast,
                            "endpoint" => HitAssociation::Endpoint,
                            _ => return Err(bad(key, v, "expected raycast or endpoint")),
                        }
                    }
                    ("estimation", "heading_align") => cfg.heading_align = parse_bool(key, v)?,
                    ("sensor", "n_beams") => cfg.sensor.n_beams = parse(key, v)?,
                    ("sensor", "fov") => cfg.sensor.fov = parse(key, v)?,
                    ("sensor", "z_max") => cfg.sensor.z_max = parse(key, v)?,
                    ("sensor", "r_occ") => cfg.sensor.r_occ = parse(key, v)?,
                    ("sensor", "r_free") => cfg.sensor.r_free = parse(key, v)?,
                    ("sensor", "beam_noise_std") => cfg.sensor.beam_noise_std = parse(key, v)?,
                    ("noise", "trans_std") => cfg.sim.noise.trans_std = parse(key, v)?,
                    ("noise", "rot_std") => cfg.sim.noise.rot_std = parse(key, v)?,
                    ("noise", "heading_extra_std") => cfg.sim.noise.heading_extra_std = parse(key, v)?,
                    ("sim", "dt") => cfg.sim.dt = parse(key, v)?,
                    ("sim", "lidar_every") => cfg.sim.lidar_every = parse(key, v)?,
                    ("sim", "robot_radius") => cfg.sim.robot_radius = parse(key, v)?,
                    ("sim", "v_max") => cfg.sim.v_max = parse(key, v)?,
                    ("sim", "omega_max") => cfg.sim.omega_max = parse(key, v)?,
                    ("decision", "min_cluster_size") => cfg.decision.min_cluster_size = parse(key, v)?,
                    ("decision", "free_threshold") => cfg.decision.free_threshold = parse(key, v)?,
                    ("decision", "occ_threshold") => cfg.decision.occ_threshold = parse(key, v)?,
                    ("decision", "h_max") => cfg.decision.h_max = parse(key, v)?,
                    ("decision", "rollout_scan_stride") => cfg.decision.rollout_scan_stride = parse(key, v)?,
                    ("decision", "rollout_beams") => cfg.decision.rollout_beams = parse(key, v)?,
                    ("decision", "inflation_radius") => cfg.decision.inflation_radius = parse(key, v)?,
                    ("decision", "lethal_radius") => cfg.decision.lethal_radius = parse(key, v)?,
                    ("decision", "v_nom") => cfg.decision.v_nom = parse(key, v)?,
                    ("decision", "waypoint_spacing") => cfg.decision.waypoint_spacing = parse(key, v)?,
                    ("decision", "goal_tolerance") => cfg.decision.goal_tolerance = parse(key, v)?,
                    ("decision", "replan_interval") => cfg.decision.replan_interval = parse(key, v)?,
                    ("decision", "max_candidates") => cfg.decision.max_candidates = parse(key, v)?,
                    _ => return Err(unknown()),
                }
            }
        }
        if let Some(n) = seed_count {
            cfg.seeds = (seed_base..seed_base + n).collect();
        }
        cfg.decision.entropy =
            EntropySpec::new(family, alpha).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy values shared between sub-configs (step length, speed limits).
    pub fn sync(&mut self) {
        self.decision.dt = self.sim.dt;
        self.decision.omega_max = self.decision.omega_max.min(self.sim.omega_max);
        self.decision.v_nom = self.decision.v_nom.min(self.sim.v_max);
        self.decision.rollout_scan_stride = self.decision.rollout_scan_stride.max(1);
    }

    // negated comparisons below also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("no seeds".into()));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::Invalid("max_steps must be positive".into()));
        }
        self.decision.validate().map_err(ConfigError::Invalid)?;
        self.map_params.validate().map_err(ConfigError::Invalid)?;
        self.sensor
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.sim.dt > 0.0) || self.sim.lidar_every == 0 || self.sim.robot_radius < 0.0 {
            return Err(ConfigError::Invalid(
                "sim needs dt > 0, lidar_every ≥ 1 and robot_radius ≥ 0".into(),
            ));
        }
        let noise = &self.sim.noise;
        if [noise.trans_std, noise.rot_std, noise.heading_extra_std, self.init_pos_std, self.init_heading_std]
            .iter()
            .any(|s| !(*s >= 0.0))
        {
            return Err(ConfigError::Invalid("standard deviations must be non-negative".into()));
        }
        Ok(())
    }

    /// The configuration in the same text format; parsing it back yields an
    /// equal config.
    pub fn to_ini_string(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "map = {}", self.map);
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        let _ = writeln!(s, "ablation = {}", self.ablation);
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "start_clearance = {}", self.start_clearance);
        let _ = writeln!(s, "init_pos_std = {}", self.init_pos_std);
        let _ = writeln!(s, "init_heading_std = {}", self.init_heading_std);
        let _ = writeln!(s, "\n[custom]");
        let _ = writeln!(s, "localization = {}", localization_name(self.custom.localization));
        let _ = writeln!(s, "map_model = {}", map_model_name(self.custom.map_model));
        let _ = writeln!(s, "decision_map = {}", decision_map_name(self.custom.decision_map));
        let _ = writeln!(s, "\n[entropy]");
        let _ = writeln!(s, "family = {}", self.decision.entropy.family());
        let _ = writeln!(s, "alpha = {}", self.decision.entropy.alpha());
        let _ = writeln!(s, "\n[estimation]");
        let _ = writeln!(s, "gamma = {}", self.decision.gamma);
        let _ = writeln!(s, "n_max = {}", self.map_params.n_max);
        let _ = writeln!(s, "l_occ = {}", self.map_params.l_occ);
        let _ = writeln!(s, "l_free = {}", self.map_params.l_free);
        let pcw = match self.map_params.pass_cell_weighting {
            PassCellWeighting::AsStored => "as_stored",
            PassCellWeighting::ForcedOne => "forced_one",
        };
        let _ = writeln!(s, "pass_cell_weighting = {pcw}");
        let rv = match self.range_variance {
            RangeVariance::Coupled => "coupled",
            RangeVariance::MomentMatched => "moment_matched",
        };
        let _ = writeln!(s, "range_variance = {rv}");
        let ha = match self.hit_association {
            HitAssociation::RayCast => "raycast",
            HitAssociation::Endpoint => "endpoint",
        };
        let _ = writeln!(s, "hit_association = {ha}");
        let _ = writeln!(s, "heading_align = {}", self.heading_align);
        let sp = &self.sensor;
        let _ = writeln!(s, "\n[sensor]");
        let _ = writeln!(s, "n_beams = {}\nfov = {}\nz_max = {}", sp.n_beams, sp.fov, sp.z_max);
        let _ = writeln!(s, "r_occ = {}\nr_free = {}\nbeam_noise_std = {}", sp.r_occ, sp.r_free, sp.beam_noise_std);
        let n: &NoiseSpec = &self.sim.noise;
        let _ = writeln!(s, "\n[noise]");
        let _ = writeln!(s, "trans_std = {}\nrot_std = {}\nheading_extra_std = {}", n.trans_std, n.rot_std, n.heading_extra_std);
        let sim = &self.sim;
        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "dt = {}\nlidar_every = {}\nrobot_radius = {}", sim.dt, sim.lidar_every, sim.robot_radius);
        let _ = writeln!(s, "v_max = {}\nomega_max = {}", sim.v_max, sim.omega_max);
        let d = &self.decision;
        let _ = writeln!(s, "\n[decision]");
        let _ = writeln!(s, "min_cluster_size = {}\nfree_threshold = {}\nocc_threshold = {}", d.min_cluster_size, d.free_threshold, d.occ_threshold);
        let _ = writeln!(s, "h_max = {}\nrollout_scan_stride = {}\nrollout_beams = {}", d.h_max, d.rollout_scan_stride, d.rollout_beams);
        let _ = writeln!(s, "lethal_radius = {}", d.lethal_radius);
        let _ = writeln!(s, "inflation_radius = {}\nv_nom = {}\nwaypoint_spacing = {}", d.inflation_radius, d.v_nom, d.waypoint_spacing);
        let _ = writeln!(s, "goal_tolerance = {}\nreplan_interval = {}\nmax_candidates = {}", d.goal_tolerance, d.replan_interval, d.max_candidates);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_ini_str(&cfg.to_ini_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[run]\nmap = fixture:rooms\nseed_count = 3\nseed_base = 10\nablation = B1\n\n[entropy]\nfamily = be\nalpha = 3\n\n[sensor]\nr_free = 4.0\n";
        let cfg = RunConfig::from_ini_str(text).unwrap();
        assert_eq!(cfg.map, MapSource::Fixture("rooms".into()));
        assert_eq!(cfg.seeds, vec![10, 11, 12]);
        assert_eq!(cfg.ablation, Ablation::B1);
        assert_eq!(cfg.decision.entropy.family(), EntropyFamily::Behavioral);
        assert_eq!(cfg.decision.entropy.alpha(), 3.0);
        assert_eq!(cfg.sensor.r_free, 4.0);
    }

    #[test]
    fn errors_name_the_problem() {
        let e = RunConfig::from_ini_str("[run]\nmax_stepz = 3\n").unwrap_err();
        assert!(e.to_string().contains("max_stepz"));
        let e = RunConfig::from_ini_str("[decision]\nh_max = lots\n").unwrap_err();
        assert!(e.to_string().contains("h_max"));
        let e = RunConfig::from_ini_str("[decision]\nfree_threshold = 0.7\n").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(_)));
        let e = RunConfig::from_ini_str("[run]\nablation = A9\n").unwrap_err();
        assert!(e.to_string().contains("A9"));
    }
}
