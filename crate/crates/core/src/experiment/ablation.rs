//! Ablation tags and the estimator/decision models they stand for.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::explore::{DecisionMapSource, MapModel};
use crate::localization::LocalizationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    A1,
    A2,
    A3,
    A4,
    A5,
    B1,
    B2,
    B3,
    Custom,
}

impl Ablation {
    pub const ALL: [Ablation; 8] = [
        Ablation::A1,
        Ablation::A2,
        Ablation::A3,
        Ablation::A4,
        Ablation::A5,
        Ablation::B1,
        Ablation::B2,
        Ablation::B3,
    ];
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Self::A1,
            "A2" => Self::A2,
            "A3" => Self::A3,
            "A4" => Self::A4,
            "A5" => Self::A5,
            "B1" => Self::B1,
            "B2" => Self::B2,
            "B3" => Self::B3,
            "CUSTOM" => Self::Custom,
            _ => return Err(format!("unknown ablation `{}` (A1..A5, B1..B3, custom)", s.trim())),
        })
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::A3 => "A3",
            Self::A4 => "A4",
            Self::A5 => "A5",
            Self::B1 => "B1",
            Self::B2 => "B2",
            Self::B3 => "B3",
            Self::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modes {
    pub localization: LocalizationMode,
    pub map_model: MapModel,
    pub decision_map: DecisionMapSource,
}

/// Modes of a named ablation; `None` for `Custom`, whose modes come from the
/// config.
pub fn expand_ablation(tag: Ablation) -> Option<Modes> {
    use DecisionMapSource::*;
    use LocalizationMode::*;
    let m = |localization, map_model, decision_map| Modes {
        localization,
        map_model,
        decision_map,
    };
    Some(match tag {
        Ablation::A1 => m(OdomOnly, MapModel::Inverse, Estimation),
        Ablation::A2 => m(Decoupled, MapModel::Inverse, Estimation),
        Ablation::A3 => m(Coupled, MapModel::Inverse, Estimation),
        Ablation::A4 => m(Decoupled, MapModel::TBayes, Estimation),
        Ablation::A5 => m(Coupled, MapModel::TBayes, Estimation),
        Ablation::B1 => m(Coupled, MapModel::TBayes, InverseShadow),
        Ablation::B2 => m(Coupled, MapModel::TBayes, CertainPoseShadow),
        Ablation::B3 => m(Coupled, MapModel::TBayes, Estimation),
        Ablation::Custom => return None,
    })
}
