//! Occupancy grid storage and world/grid geometry.
//!
//! Cells are stored row-major with row 0 at the lowest `y`. Each cell keeps
//! an occupancy probability and the number of times a beam has terminated in
//! it (used to temper map updates).

mod io;
mod ray;

pub use io::{load_map, load_truth_map, save_ascii, save_map, MapFormat};
pub use ray::{cast_ray, traverse_ray, traverse_ray_into, CellWalk, RayCell, RayHit, RaySets};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities are clamped to `[P_MIN, 1 - P_MIN]` so that entropies and
/// likelihood ratios stay finite.
pub const P_MIN: f64 = 1e-4;

/// Clamp a probability into the representable range.
#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(P_MIN, 1.0 - P_MIN)
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),
    #[error("point ({x:.3}, {y:.3}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("grids do not share the same geometry")]
    GeometryMismatch,
    #[error("{path}: line {line}, offset {offset}: {msg}")]
    Format {
        path: String,
        line: usize,
        offset: usize,
        msg: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Row/column address of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2<f64>,
    probs: Vec<f64>,
    hit_counts: Vec<u32>,
}

impl OccupancyGrid {
    /// All-unknown grid (every cell at 0.5).
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2<f64>,
    ) -> Result<Self, GridError> {
        Self::filled(width, height, resolution, origin, 0.5)
    }

    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2<f64>,
        prob: f64,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidGeometry(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !resolution.is_finite() || resolution <= 0.0 {
            return Err(GridError::InvalidGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !origin.x.is_finite() || !origin.y.is_finite() {
            return Err(GridError::InvalidGeometry("origin must be finite".into()));
        }
        let n = width * height;
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            probs: vec![clamp_prob(prob); n],
            hit_counts: vec![0; n],
        })
    }

    /// Build a grid from row-major probabilities (row 0 = lowest `y`).
    pub fn from_probs(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2<f64>,
        probs: Vec<f64>,
    ) -> Result<Self, GridError> {
        if probs.len() != width * height {
            return Err(GridError::InvalidGeometry(format!(
                "expected {} probabilities, got {}",
                width * height,
                probs.len()
            )));
        }
        let mut grid = Self::new(width, height, resolution, origin)?;
        for (dst, p) in grid.probs.iter_mut().zip(probs) {
            *dst = clamp_prob(p);
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2<f64> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// World extent as `(min, max)` corners.
    pub fn extent(&self) -> (Point2<f64>, Point2<f64>) {
        let max = Point2::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        );
        (self.origin, max)
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.resolution == other.resolution
            && self.origin == other.origin
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    /// Signed-coordinate variant of [`contains`](Self::contains).
    pub fn contains_signed(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    #[inline]
    pub fn index(&self, cell: CellIndex) -> usize {
        debug_assert!(self.contains(cell), "cell {cell:?} out of bounds");
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> CellIndex {
        CellIndex::new(index / self.width, index % self.width)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.len()).map(|i| self.cell_at(i))
    }

    pub fn world_to_cell(&self, point: Point2<f64>) -> Result<CellIndex, GridError> {
        let fx = (point.x - self.origin.x) / self.resolution;
        let fy = (point.y - self.origin.y) / self.resolution;
        let (col, row) = (fx.floor(), fy.floor());
        if !(col >= 0.0 && row >= 0.0 && col < self.width as f64 && row < self.height as f64) {
            return Err(GridError::OutOfBounds {
                x: point.x,
                y: point.y,
            });
        }
        Ok(CellIndex::new(row as usize, col as usize))
    }

    pub fn cell_center(&self, cell: CellIndex) -> Point2<f64> {
        Point2::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains_point(&self, point: Point2<f64>) -> bool {
        self.world_to_cell(point).is_ok()
    }

    #[inline]
    pub fn prob(&self, cell: CellIndex) -> f64 {
        self.probs[self.index(cell)]
    }

    /// Store a probability, clamped to `[P_MIN, 1 - P_MIN]`.
    #[inline]
    pub fn set_prob(&mut self, cell: CellIndex, p: f64) {
        let i = self.index(cell);
        self.probs[i] = clamp_prob(p);
    }

    #[inline]
    pub fn hit_count(&self, cell: CellIndex) -> u32 {
        self.hit_counts[self.index(cell)]
    }

    /// Increment the hit count, saturating at `cap`. Returns the new count.
    pub fn record_hit(&mut self, cell: CellIndex, cap: u32) -> u32 {
        let i = self.index(cell);
        let n = (self.hit_counts[i] + 1).min(cap);
        self.hit_counts[i] = n;
        n
    }

    pub fn set_hit_count(&mut self, cell: CellIndex, n: u32) {
        let i = self.index(cell);
        self.hit_counts[i] = n;
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn hit_counts(&self) -> &[u32] {
        &self.hit_counts
    }

    /// Ground-truth convention: a cell is an obstacle iff its probability
    /// exceeds one half.
    pub fn is_occupied(&self, cell: CellIndex) -> bool {
        self.prob(cell) > 0.5
    }

    /// Copy with probabilities snapped to `1 - P_MIN` (above `threshold`) or
    /// `P_MIN` (at or below), hit counts cleared.
    pub fn binarized(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.probs {
            *p = if *p > threshold { 1.0 - P_MIN } else { P_MIN };
        }
        out.hit_counts.fill(0);
        out
    }

    /// Reset every cell to unknown with zero hit counts, keeping geometry.
    pub fn unknown_like(&self) -> Self {
        let mut out = self.clone();
        out.probs.fill(0.5);
        out.hit_counts.fill(0);
        out
    }

    /// Distance from `point` to the nearest cell whose probability is at or
    /// above `threshold`, searched within `radius`. Returns `None` when no such
    /// cell lies within the radius. Cells are treated as squares.
    pub fn nearest_obstacle_within(
        &self,
        point: Point2<f64>,
        radius: f64,
        threshold: f64,
    ) -> Option<f64> {
        let r = self.resolution;
        let c_lo = ((point.x - radius - self.origin.x) / r).floor() as i64;
        let c_hi = ((point.x + radius - self.origin.x) / r).floor() as i64;
        let r_lo = ((point.y - radius - self.origin.y) / r).floor() as i64;
        let r_hi = ((point.y + radius - self.origin.y) / r).floor() as i64;
        let mut best: Option<f64> = None;
        for row in r_lo.max(0)..=r_hi.min(self.height as i64 - 1) {
            for col in c_lo.max(0)..=c_hi.min(self.width as i64 - 1) {
                let cell = CellIndex::new(row as usize, col as usize);
                if self.prob(cell) < threshold {
                    continue;
                }
                let x0 = self.origin.x + col as f64 * r;
                let y0 = self.origin.y + row as f64 * r;
                let dx = (x0 - point.x).max(point.x - (x0 + r)).max(0.0);
                let dy = (y0 - point.y).max(point.y - (y0 + r)).max(0.0);
                let d = dx.hypot(dy);
                if d <= radius && best.is_none_or(|b| d < b) {
                    best = Some(d);
                }
            }
        }
        best
    }

    /// Order-sensitive FNV-1a digest over probabilities and hit counts.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for p in &self.probs {
            eat(&p.to_bits().to_le_bytes());
        }
        for n in &self.hit_counts {
            eat(&n.to_le_bytes());
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(w: usize, h: usize, res: f64, ox: f64, oy: f64) -> OccupancyGrid {
        OccupancyGrid::new(w, h, res, Point2::new(ox, oy)).unwrap()
    }

    #[test]
    fn world_to_cell_examples() {
        let g = grid(10, 10, 0.2, 0.0, 0.0);
        assert_eq!(g.world_to_cell(Point2::new(0.0, 0.0)).unwrap(), CellIndex::new(0, 0));
        assert_eq!(g.world_to_cell(Point2::new(0.30, 0.10)).unwrap(), CellIndex::new(0, 1));
        let g = grid(10, 10, 0.5, -1.0, -1.0);
        assert_eq!(g.world_to_cell(Point2::new(0.0, 0.0)).unwrap(), CellIndex::new(2, 2));
    }

    #[test]
    fn world_to_cell_out_of_bounds() {
        let g = grid(4, 3, 0.5, 0.0, 0.0);
        assert!(matches!(
            g.world_to_cell(Point2::new(-0.01, 0.2)),
            Err(GridError::OutOfBounds { .. })
        ));
        assert!(g.world_to_cell(Point2::new(2.0, 0.2)).is_err());
        assert!(g.world_to_cell(Point2::new(0.2, 1.5)).is_err());
        assert!(g.world_to_cell(Point2::new(1.99, 1.49)).is_ok());
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(OccupancyGrid::new(0, 3, 0.2, Point2::origin()).is_err());
        assert!(OccupancyGrid::new(3, 3, 0.0, Point2::origin()).is_err());
        assert!(OccupancyGrid::new(3, 3, -0.1, Point2::origin()).is_err());
    }

    #[test]
    fn probabilities_are_clamped() {
        let mut g = grid(2, 2, 1.0, 0.0, 0.0);
        g.set_prob(CellIndex::new(0, 0), 1.0);
        g.set_prob(CellIndex::new(0, 1), -3.0);
        assert_eq!(g.prob(CellIndex::new(0, 0)), 1.0 - P_MIN);
        assert_eq!(g.prob(CellIndex::new(0, 1)), P_MIN);
    }

    #[test]
    fn hit_counts_saturate() {
        let mut g = grid(2, 2, 1.0, 0.0, 0.0);
        let c = CellIndex::new(1, 1);
        for _ in 0..10 {
            g.record_hit(c, 3);
        }
        assert_eq!(g.hit_count(c), 3);
    }

    #[test]
    fn obstacle_distance_uses_cell_squares() {
        let mut g = grid(10, 10, 0.2, 0.0, 0.0);
        g.set_prob(CellIndex::new(5, 5), 1.0);
        // Cell (5,5) spans x in [1.0, 1.2].
        let d = g.nearest_obstacle_within(Point2::new(0.7, 1.1), 1.0, 0.65).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
        assert!(g.nearest_obstacle_within(Point2::new(0.1, 0.1), 0.5, 0.65).is_none());
    }

    proptest! {
        #[test]
        fn cell_center_round_trips(w in 1usize..40, h in 1usize..40, res in 0.05f64..2.0,
                                   ox in -10.0f64..10.0, oy in -10.0f64..10.0,
                                   r in 0usize..40, c in 0usize..40) {
            let g = grid(w, h, res, ox, oy);
            let cell = CellIndex::new(r % h, c % w);
            prop_assert_eq!(g.world_to_cell(g.cell_center(cell)).unwrap(), cell);
        }
    }
}
