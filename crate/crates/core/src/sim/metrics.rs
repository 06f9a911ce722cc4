//! Trajectory, map and exploration-progress metrics.

use nalgebra::Point2;
use thiserror::Error;

use crate::entropy::nats_to_bits;
use crate::grid::OccupancyGrid;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trajectory lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty trajectory")]
    Empty,
    #[error("maps have different geometry")]
    GeometryMismatch,
}

/// Position RMSE and MAE over paired samples.
pub fn metrics_translation(
    est: &[Point2<f64>],
    truth: &[Point2<f64>],
) -> Result<(f64, f64), MetricsError> {
    if est.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(est.len(), truth.len()));
    }
    if est.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = est.len() as f64;
    let (sq, abs) = est
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm())
        .fold((0.0, 0.0), |(s, a), e| (s + e * e, a + e));
    Ok(((sq / n).sqrt(), abs / n))
}

/// Band around one half treated as "unknown" and excluded from the map error.
pub const UNKNOWN_BAND: f64 = 1e-3;

/// Class-balanced map RMSE ×100: mean squared error over occupied truth
/// cells plus the same over free truth cells, square-rooted. Cells the
/// estimate still considers unknown are skipped. `Ok(None)` when no cell is
/// classified; an empty class contributes zero.
pub fn metrics_map_error(
    est: &OccupancyGrid,
    truth: &OccupancyGrid,
) -> Result<Option<f64>, MetricsError> {
    if !est.same_geometry(truth) {
        return Err(MetricsError::GeometryMismatch);
    }
    let (mut occ, mut n_occ, mut free, mut n_free) = (0.0, 0usize, 0.0, 0usize);
    for (&p, &t) in est.probs().iter().zip(truth.probs()) {
        if (p - 0.5).abs() < UNKNOWN_BAND {
            continue;
        }
        if t > 0.5 {
            occ += (1.0 - p) * (1.0 - p);
            n_occ += 1;
        } else {
            free += p * p;
            n_free += 1;
        }
    }
    if n_occ + n_free == 0 {
        log::warn!("map error undefined: every estimated cell is unknown");
        return Ok(None);
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(Some(100.0 * (mean(occ, n_occ) + mean(free, n_free)).sqrt()))
}

/// Mean per-step entropy drop over a lag of `dt_window` samples, in bits.
pub fn metrics_uncertainty_reduction(entropy_series: &[f64], dt_window: usize) -> f64 {
    let lag = dt_window.max(1);
    if entropy_series.len() <= lag {
        return 0.0;
    }
    let drops: Vec<f64> = entropy_series
        .windows(lag + 1)
        .map(|w| (w[0] - w[lag]) / lag as f64)
        .collect();
    nats_to_bits(drops.iter().sum::<f64>() / drops.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellIndex, P_MIN};
    use approx::assert_relative_eq;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2<f64>> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn translation_examples() {
        let a = pts(&[(0.0, 0.0), (1.0, 2.0), (3.0, -1.0)]);
        assert_eq!(metrics_translation(&a, &a).unwrap(), (0.0, 0.0));
        let off: Vec<_> = a.iter().map(|p| Point2::new(p.x + 0.3, p.y)).collect();
        let (r, m) = metrics_translation(&off, &a).unwrap();
        assert_relative_eq!(r, 0.3, epsilon = 1e-12);
        assert_relative_eq!(m, 0.3, epsilon = 1e-12);
        let (r, m) = metrics_translation(&pts(&[(0.1, 0.0), (0.0, 0.3)]), &pts(&[(0.0, 0.0), (0.0, 0.0)])).unwrap();
        assert_relative_eq!(r, 0.05f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r, 0.2236, epsilon = 1e-4);
        assert_relative_eq!(m, 0.2, epsilon = 1e-12);
        assert_eq!(metrics_translation(&a, &a[..2]), Err(MetricsError::LengthMismatch(3, 2)));
    }

    #[test]
    fn map_error_examples() {
        let mut truth = OccupancyGrid::filled(4, 4, 0.2, Point2::origin(), 0.0).unwrap();
        truth.set_prob(CellIndex::new(1, 1), 1.0);
        let e = metrics_map_error(&truth, &truth).unwrap().unwrap();
        assert_relative_eq!(e, 100.0 * 2f64.sqrt() * P_MIN, epsilon = 1e-12);
        assert!((e - 0.014).abs() < 1e-3);

        let unknown = truth.unknown_like();
        assert_eq!(metrics_map_error(&unknown, &truth).unwrap(), None);

        let mut est = unknown.clone();
        est.set_prob(CellIndex::new(1, 1), 0.9);
        est.set_prob(CellIndex::new(2, 2), 0.1);
        let e = metrics_map_error(&est, &truth).unwrap().unwrap();
        assert_relative_eq!(e, 100.0 * 0.02f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(e, 14.142, epsilon = 1e-3);
    }

    #[test]
    fn uncertainty_reduction_examples() {
        assert_eq!(metrics_uncertainty_reduction(&[5.0; 10], 1), 0.0);
        let lin: Vec<f64> = (0..20).map(|k| 100.0 - k as f64 * std::f64::consts::LN_2).collect();
        assert_relative_eq!(metrics_uncertainty_reduction(&lin, 1), 1.0, epsilon = 1e-12);
        let r = metrics_uncertainty_reduction(&[10.0, 8.0, 7.0], 1);
        assert_relative_eq!(r, 1.5 / std::f64::consts::LN_2, epsilon = 1e-12);
        assert_relative_eq!(r, 2.164, epsilon = 1e-3);
    }
}
