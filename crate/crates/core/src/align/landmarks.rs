use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AlignError;

pub const LANDMARK_COUNT: usize = 90;

/// Index ranges of the canonical 90-point layout. "Right" and "left" are the
/// subject's sides, so the right brow and eye appear on the image's left.
pub mod canonical {
    use std::ops::Range;

    pub const JAWLINE: Range<usize> = 0..21;
    pub const RIGHT_BROW: Range<usize> = 21..29;
    pub const LEFT_BROW: Range<usize> = 29..37;
    pub const NOSE: Range<usize> = 37..49;
    pub const RIGHT_EYE: Range<usize> = 49..59;
    pub const LEFT_EYE: Range<usize> = 59..69;
    pub const OUTER_LIP: Range<usize> = 69..81;
    pub const INNER_LIP: Range<usize> = 81..90;
}

/// Subpixel image-space position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn translated(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Exactly 90 in-bounds facial landmarks in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct LandmarkFile {
    points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    /// Validates count and bounds against a `width` x `height` image. Valid
    /// coordinates span pixel centers, `[0, width - 1] x [0, height - 1]`.
    pub fn new(points: Vec<Point>, width: usize, height: usize) -> Result<Self, AlignError> {
        if points.len() != LANDMARK_COUNT {
            return Err(AlignError::PointCount {
                found: points.len(),
            });
        }
        let (max_x, max_y) = (width as f64 - 1.0, height as f64 - 1.0);
        for (index, p) in points.iter().enumerate() {
            let ok = p.x.is_finite() && p.y.is_finite() && (0.0..=max_x).contains(&p.x) && (0.0..=max_y).contains(&p.y);
            if !ok {
                return Err(AlignError::OutOfBounds {
                    index,
                    x: p.x,
                    y: p.y,
                    width,
                    height,
                });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Point {
        self.points[index]
    }

    pub fn to_json(&self) -> String {
        let file = LandmarkFile {
            points: self.points.iter().map(|p| [p.x, p.y]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("landmarks serialize")
    }
}

/// Parses the `{"points": [[x, y], ...]}` document and validates it.
pub fn parse_landmarks(text: &str, width: usize, height: usize) -> Result<LandmarkSet, AlignError> {
    let file: LandmarkFile =
        serde_json::from_str(text).map_err(|e| AlignError::Malformed(e.to_string()))?;
    let points = file.points.into_iter().map(|[x, y]| Point::new(x, y)).collect();
    LandmarkSet::new(points, width, height)
}

pub fn load_landmarks(path: &Path, width: usize, height: usize) -> Result<LandmarkSet, AlignError> {
    let text = std::fs::read_to_string(path).map_err(|source| AlignError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_landmarks(&text, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(n: usize) -> Vec<[f64; 2]> {
        (0..n).map(|i| [10.0 + (i % 10) as f64 * 5.5, 10.0 + (i / 10) as f64 * 4.25]).collect()
    }

    fn doc(points: &[[f64; 2]]) -> String {
        serde_json::to_string(&serde_json::json!({ "points": points })).unwrap()
    }

    #[test]
    fn canonical_ranges_tile_all_points() {
        let ranges = [
            canonical::JAWLINE,
            canonical::RIGHT_BROW,
            canonical::LEFT_BROW,
            canonical::NOSE,
            canonical::RIGHT_EYE,
            canonical::LEFT_EYE,
            canonical::OUTER_LIP,
            canonical::INNER_LIP,
        ];
        let mut next = 0;
        for r in ranges {
            assert_eq!(r.start, next);
            next = r.end;
        }
        assert_eq!(next, LANDMARK_COUNT);
    }

    #[test]
    fn parses_valid_file() {
        let set = parse_landmarks(&doc(&grid_points(90)), 100, 100).unwrap();
        assert_eq!(set.points().len(), 90);
        assert_eq!(set.get(11), Point::new(15.5, 14.25));
        let again = parse_landmarks(&set.to_json(), 100, 100).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn wrong_count() {
        let err = parse_landmarks(&doc(&grid_points(89)), 100, 100).unwrap_err();
        assert!(matches!(err, AlignError::PointCount { found: 89 }));
    }

    #[test]
    fn out_of_bounds() {
        let mut pts = grid_points(90);
        pts[7] = [-3.0, 10.0];
        let err = parse_landmarks(&doc(&pts), 100, 100).unwrap_err();
        assert!(matches!(err, AlignError::OutOfBounds { index: 7, .. }));
        pts[7] = [99.5, 10.0];
        assert!(parse_landmarks(&doc(&pts), 100, 100).is_err());
    }

    #[test]
    fn malformed() {
        for text in ["", "{}", "{\"points\": [[1, 2, 3]]}", "[1, 2]", "{\"points\": \"x\"}"] {
            assert!(matches!(parse_landmarks(text, 10, 10), Err(AlignError::Malformed(_))), "{text}");
        }
    }

    #[test]
    fn missing_file() {
        let err = load_landmarks(Path::new("/definitely/not/here.json"), 10, 10).unwrap_err();
        assert!(matches!(err, AlignError::Io { .. }));
    }
}
