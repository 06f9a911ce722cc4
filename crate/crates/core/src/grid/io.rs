//! Map file formats: binary PGM (P5, maxval 255) and whitespace-separated
//! ASCII probabilities, plus a `key=value` metadata sidecar.
//!
//! Both formats store the top row (highest `y`) first. PGM pixels encode
//! `round(255 * (1 - p))`, so dark pixels are occupied.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point2;

use super::{clamp_prob, GridError, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Pgm,
    Ascii,
}

impl MapFormat {
    /// Guess from the file extension (`.pgm` or anything else as ASCII).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => MapFormat::Pgm,
            _ => MapFormat::Ascii,
        }
    }
}

const DEFAULT_RESOLUTION: f64 = 0.2;

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn io_err(path: &Path, source: std::io::Error) -> GridError {
    GridError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn fmt_err(path: &Path, line: usize, offset: usize, msg: impl Into<String>) -> GridError {
    GridError::Format {
        path: path.display().to_string(),
        line,
        offset,
        msg: msg.into(),
    }
}

#[derive(Debug, Default)]
struct Meta {
    width: Option<usize>,
    height: Option<usize>,
    resolution: Option<f64>,
    origin_x: Option<f64>,
    origin_y: Option<f64>,
}

fn read_meta(path: &Path) -> Result<Meta, GridError> {
    let side = sidecar_path(path);
    let text = match fs::read_to_string(&side) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Meta::default()),
        Err(e) => return Err(io_err(&side, e)),
    };
    let mut meta = Meta::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fmt_err(&side, lineno + 1, 0, "expected key=value"));
        };
        let value = value.trim();
        let bad = |what: &str| fmt_err(&side, lineno + 1, key.len() + 1, format!("bad {what}"));
        match key.trim() {
            "width" => meta.width = Some(value.parse().map_err(|_| bad("width"))?),
            "height" => meta.height = Some(value.parse().map_err(|_| bad("height"))?),
            "resolution" => meta.resolution = Some(value.parse().map_err(|_| bad("resolution"))?),
            "origin_x" => meta.origin_x = Some(value.parse().map_err(|_| bad("origin_x"))?),
            "origin_y" => meta.origin_y = Some(value.parse().map_err(|_| bad("origin_y"))?),
            _ => {}
        }
    }
    Ok(meta)
}

fn write_meta(grid: &OccupancyGrid, path: &Path) -> Result<(), GridError> {
    let side = sidecar_path(path);
    let o = grid.origin();
    let text = format!(
        "width={}\nheight={}\nresolution={}\norigin_x={}\norigin_y={}\n",
        grid.width(),
        grid.height(),
        grid.resolution(),
        o.x,
        o.y
    );
    fs::write(&side, text).map_err(|e| io_err(&side, e))
}

/// Load a map. Geometry comes from the `<path>.meta` sidecar when present,
/// otherwise 0.2 m cells with the origin at (0, 0).
///
/// PGM pixels decode to `1 - pixel/255` (clamped), so pixel 0 is occupied and
/// 255 is free. ASCII tokens are probabilities in `[0, 1]`; `?` or `-1` mark
/// unknown cells (0.5).
pub fn load_map(path: &Path, format: MapFormat) -> Result<OccupancyGrid, GridError> {
    let (width, height, top_first) = match format {
        MapFormat::Pgm => parse_pgm(path)?,
        MapFormat::Ascii => parse_ascii(path)?,
    };
    let meta = read_meta(path)?;
    if meta.width.is_some_and(|w| w != width) || meta.height.is_some_and(|h| h != height) {
        return Err(fmt_err(
            &sidecar_path(path),
            0,
            0,
            format!("sidecar dimensions disagree with {width}x{height} image"),
        ));
    }
    let mut probs = vec![0.5; width * height];
    for (i, p) in top_first.into_iter().enumerate() {
        let (img_row, col) = (i / width, i % width);
        let row = height - 1 - img_row;
        probs[row * width + col] = clamp_prob(p);
    }
    OccupancyGrid::from_probs(
        width,
        height,
        meta.resolution.unwrap_or(DEFAULT_RESOLUTION),
        Point2::new(meta.origin_x.unwrap_or(0.0), meta.origin_y.unwrap_or(0.0)),
        probs,
    )
}

/// Load a ground-truth floorplan: cells above one half become occupied
/// (`1 - P_MIN`), all others free (`P_MIN`). For PGM this is a threshold at
/// pixel 127 (pixels `<= 127` are walls).
pub fn load_truth_map(path: &Path, format: MapFormat) -> Result<OccupancyGrid, GridError> {
    Ok(load_map(path, format)?.binarized(0.5))
}

fn parse_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>), GridError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut pos = 0usize;
    let mut line = 1usize;
    let token = |pos: &mut usize, line: &mut usize| -> Result<String, GridError> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                if bytes[*pos] == b'\n' {
                    *line += 1;
                }
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(fmt_err(path, *line, start, "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos, &mut line)?;
    if magic != "P5" {
        return Err(fmt_err(path, line, 0, format!("expected P5 magic, found {magic:?}")));
    }
    let number = |what: &str, pos: &mut usize, line: &mut usize| -> Result<usize, GridError> {
        let at = *pos;
        let t = token(pos, line)?;
        t.parse::<usize>()
            .map_err(|_| fmt_err(path, *line, at, format!("bad {what}: {t:?}")))
    };
    let width = number("width", &mut pos, &mut line)?;
    let height = number("height", &mut pos, &mut line)?;
    let maxval = number("maxval", &mut pos, &mut line)?;
    if maxval != 255 {
        return Err(fmt_err(path, line, pos, format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(fmt_err(path, line, pos, "zero image dimension"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(fmt_err(
            path,
            line,
            pos,
            format!("raster truncated: need {need} bytes, have {}", bytes.len().saturating_sub(pos)),
        ));
    }
    let probs = bytes[pos..pos + need]
        .iter()
        .map(|&px| 1.0 - f64::from(px) / 255.0)
        .collect();
    Ok((width, height, probs))
}

fn parse_ascii(path: &Path) -> Result<(usize, usize, Vec<f64>), GridError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut width = None;
    let mut rows = 0usize;
    let mut probs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut count = 0usize;
        let mut offset = 0usize;
        for tok in content.split_whitespace() {
            let col = content[offset..].find(tok).map_or(offset, |i| offset + i);
            offset = col + tok.len();
            let p = match tok {
                "?" | "-1" => 0.5,
                _ => tok
                    .parse::<f64>()
                    .ok()
                    .filter(|p| (0.0..=1.0).contains(p))
                    .ok_or_else(|| {
                        fmt_err(path, lineno + 1, col, format!("expected probability, found {tok:?}"))
                    })?,
            };
            probs.push(p);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(fmt_err(
                    path,
                    lineno + 1,
                    0,
                    format!("row has {count} values, expected {w}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| fmt_err(path, 1, 0, "empty map"))?;
    Ok((width, rows, probs))
}

/// Write a PGM snapshot (`pixel = round(255 * (1 - p))`, half-up) and its
/// metadata sidecar.
pub fn save_map(grid: &OccupancyGrid, path: &Path) -> Result<(), GridError> {
    let (w, h) = (grid.width(), grid.height());
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.reserve(w * h);
    for img_row in 0..h {
        let row = h - 1 - img_row;
        for col in 0..w {
            bytes.push(prob_to_pixel(grid.probs()[row * w + col]));
        }
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    write_meta(grid, path)
}

/// Write the ASCII format (used for hand-made fixtures) and its sidecar.
pub fn save_ascii(grid: &OccupancyGrid, path: &Path) -> Result<(), GridError> {
    let (w, h) = (grid.width(), grid.height());
    let mut text = String::new();
    for img_row in 0..h {
        let row = h - 1 - img_row;
        let line: Vec<String> = (0..w)
            .map(|col| format!("{}", grid.probs()[row * w + col]))
            .collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    write_meta(grid, path)
}

pub(crate) fn prob_to_pixel(p: f64) -> u8 {
    // f64::round is half-away-from-zero, i.e. half-up for non-negative values
    (255.0 * (1.0 - p)).round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellIndex, P_MIN};
    use proptest::prelude::*;

    #[test]
    fn pixel_encoding() {
        assert_eq!(prob_to_pixel(0.5), 128);
        assert_eq!(prob_to_pixel(1.0 - P_MIN), 0);
        assert_eq!(prob_to_pixel(P_MIN), 255);
    }

    #[test]
    fn ascii_two_by_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        fs::write(&path, "1 0\n0 1\n").unwrap();
        let g = load_map(&path, MapFormat::Ascii).unwrap();
        // file order: top row first
        let file_order: Vec<f64> = [(1, 0), (1, 1), (0, 0), (0, 1)]
            .iter()
            .map(|&(r, c)| g.prob(CellIndex::new(r, c)))
            .collect();
        assert_eq!(file_order, vec![1.0 - P_MIN, P_MIN, P_MIN, 1.0 - P_MIN]);
        assert!(g.hit_counts().iter().all(|&n| n == 0));
    }

    #[test]
    fn ascii_top_line_is_highest_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        fs::write(&path, "1 1 1\n? 0 0\n").unwrap();
        let g = load_map(&path, MapFormat::Ascii).unwrap();
        assert_eq!(g.height(), 2);
        assert_eq!(g.prob(CellIndex::new(1, 2)), 1.0 - P_MIN);
        assert_eq!(g.prob(CellIndex::new(0, 0)), 0.5);
        assert_eq!(g.prob(CellIndex::new(0, 1)), P_MIN);
    }

    #[test]
    fn ascii_errors_carry_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "0 0\n0 x\n").unwrap();
        match load_map(&path, MapFormat::Ascii) {
            Err(GridError::Format { line, offset, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(offset, 2);
            }
            other => panic!("expected format error, got {other:?}"),
        }
        fs::write(&path, "0 0\n0\n").unwrap();
        assert!(matches!(load_map(&path, MapFormat::Ascii), Err(GridError::Format { line: 2, .. })));
    }

    #[test]
    fn pgm_threshold_convention() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let mut bytes = b"P5\n# comment\n4 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 127, 128, 255]);
        fs::write(&path, bytes).unwrap();
        let truth = load_truth_map(&path, MapFormat::Pgm).unwrap();
        let occ: Vec<bool> = (0..4).map(|c| truth.is_occupied(CellIndex::new(0, c))).collect();
        assert_eq!(occ, vec![true, true, false, false]);
        assert_eq!(truth.prob(CellIndex::new(0, 0)), 1.0 - P_MIN);
        assert_eq!(truth.prob(CellIndex::new(0, 3)), P_MIN);
    }

    #[test]
    fn pgm_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pgm");
        fs::write(&path, b"P2\n1 1\n255\n0").unwrap();
        assert!(matches!(load_map(&path, MapFormat::Pgm), Err(GridError::Format { .. })));
        fs::write(&path, b"P5\n3 3\n255\n\x00\x00").unwrap();
        assert!(matches!(load_map(&path, MapFormat::Pgm), Err(GridError::Format { .. })));
    }

    #[test]
    fn sidecar_restores_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        let g = OccupancyGrid::new(5, 3, 0.5, Point2::new(-1.0, 2.0)).unwrap();
        save_map(&g, &path).unwrap();
        let back = load_map(&path, MapFormat::Pgm).unwrap();
        assert!(back.same_geometry(&g));
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = load_map(Path::new("/nonexistent/map.pgm"), MapFormat::Pgm);
        assert!(matches!(r, Err(GridError::Io { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pgm_round_trip_within_quantization(w in 1usize..12, h in 1usize..12,
                                              seed in proptest::collection::vec(0.0f64..1.0, 144)) {
            let probs: Vec<f64> = (0..w * h).map(|i| seed[i]).collect();
            let g = OccupancyGrid::from_probs(w, h, 0.2, Point2::origin(), probs).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.pgm");
            save_map(&g, &path).unwrap();
            let back = load_map(&path, MapFormat::Pgm).unwrap();
            for (a, b) in g.probs().iter().zip(back.probs()) {
                prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}
