//! Shannon, Rényi and behavioral entropies of binary occupancy cells, map
//! entropy and information gain. All values are in nats.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::OccupancyGrid;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("entropy parameter alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("unknown entropy family {0:?}")]
    UnknownFamily(String),
    #[error("maps have different geometry")]
    GeometryMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyFamily {
    Shannon,
    Renyi,
    Behavioral,
}

impl FromStr for EntropyFamily {
    type Err = EntropyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shannon" | "se" => Ok(Self::Shannon),
            "renyi" | "rényi" | "re" => Ok(Self::Renyi),
            "behavioral" | "behavioural" | "be" => Ok(Self::Behavioral),
            other => Err(EntropyError::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for EntropyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Shannon => "shannon",
            Self::Renyi => "renyi",
            Self::Behavioral => "behavioral",
        })
    }
}

/// Entropy family with its parameter. For the behavioral family `beta` is
/// derived from `alpha` as `(ln 2)^(1−α)` and cannot be set separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct EntropySpec {
    family: EntropyFamily,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    family: EntropyFamily,
    alpha: f64,
}

impl TryFrom<RawSpec> for EntropySpec {
    type Error = EntropyError;
    fn try_from(r: RawSpec) -> Result<Self, Self::Error> {
        Self::new(r.family, r.alpha)
    }
}

impl From<EntropySpec> for RawSpec {
    fn from(s: EntropySpec) -> Self {
        Self {
            family: s.family,
            alpha: s.alpha,
        }
    }
}

impl Default for EntropySpec {
    fn default() -> Self {
        Self::shannon()
    }
}

impl EntropySpec {
    pub fn new(family: EntropyFamily, alpha: f64) -> Result<Self, EntropyError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(EntropyError::InvalidAlpha(alpha));
        }
        let (alpha, beta) = match family {
            EntropyFamily::Shannon => (1.0, 1.0),
            EntropyFamily::Renyi => (alpha, 1.0),
            EntropyFamily::Behavioral => (alpha, LN_2.powf(1.0 - alpha)),
        };
        Ok(Self {
            family,
            alpha,
            beta,
        })
    }

    pub fn shannon() -> Self {
        Self {
            family: EntropyFamily::Shannon,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn renyi(alpha: f64) -> Result<Self, EntropyError> {
        Self::new(EntropyFamily::Renyi, alpha)
    }

    pub fn behavioral(alpha: f64) -> Result<Self, EntropyError> {
        Self::new(EntropyFamily::Behavioral, alpha)
    }

    pub fn family(&self) -> EntropyFamily {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl fmt::Display for EntropySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(alpha={})", self.family, self.alpha)
    }
}

fn shannon(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Prelec probability weighting `exp(−β(−ln q)^α)`.
pub fn prelec_weight(q: f64, alpha: f64, beta: f64) -> f64 {
    (-beta * (-q.ln()).powf(alpha)).exp()
}

pub fn cell_entropy(p: f64, spec: &EntropySpec) -> f64 {
    match spec.family {
        EntropyFamily::Shannon => shannon(p),
        EntropyFamily::Renyi if (spec.alpha - 1.0).abs() < 1e-12 => shannon(p),
        EntropyFamily::Renyi => {
            let a = spec.alpha;
            (p.powf(a) + (1.0 - p).powf(a)).ln() / (1.0 - a)
        }
        EntropyFamily::Behavioral => {
            // −w ln w with −ln w = β(−ln q)^α
            let term = |q: f64| {
                if q <= 0.0 {
                    return 0.0;
                }
                let s = spec.beta * (-q.ln()).powf(spec.alpha);
                s * (-s).exp()
            };
            term(p) + term(1.0 - p)
        }
    }
}

/// Sum of cell entropies in storage order.
pub fn map_entropy(map: &OccupancyGrid, spec: &EntropySpec) -> f64 {
    map.probs().iter().map(|&p| cell_entropy(p, spec)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub current_entropy: f64,
    pub predicted_entropy: f64,
    pub gain: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_cell: Option<Vec<f64>>,
}

pub fn information_gain(
    map_now: &OccupancyGrid,
    map_predicted: &OccupancyGrid,
    spec: &EntropySpec,
) -> Result<GainReport, EntropyError> {
    if !map_now.same_geometry(map_predicted) {
        return Err(EntropyError::GeometryMismatch);
    }
    let current_entropy = map_entropy(map_now, spec);
    let predicted_entropy = map_entropy(map_predicted, spec);
    Ok(GainReport {
        current_entropy,
        predicted_entropy,
        gain: current_entropy - predicted_entropy,
        per_cell: None,
    })
}

/// Like [`information_gain`] with each cell's entropy drop retained.
pub fn information_gain_detailed(
    map_now: &OccupancyGrid,
    map_predicted: &OccupancyGrid,
    spec: &EntropySpec,
) -> Result<GainReport, EntropyError> {
    let mut report = information_gain(map_now, map_predicted, spec)?;
    report.per_cell = Some(
        map_now
            .probs()
            .iter()
            .zip(map_predicted.probs())
            .map(|(&a, &b)| cell_entropy(a, spec) - cell_entropy(b, spec))
            .collect(),
    );
    Ok(report)
}

pub fn nats_to_bits(x: f64) -> f64 {
    x / LN_2
}
