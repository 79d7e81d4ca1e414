use serde::{Deserialize, Serialize};
use std::fmt;

/// Side of the square stimulus region, in pixels.
pub const REGION_PX: f64 = 500.0;
/// Radius of the largest mark (40px diameter).
pub const MAX_MARK_RADIUS: f64 = 20.0;
/// Minimum gap between mark boundaries.
pub const BOUNDARY_GAP: f64 = 8.0;
/// Center distance that keeps any two marks of the widest size range apart.
pub const MIN_CENTER_DIST: f64 = 2.0 * MAX_MARK_RADIUS + BOUNDARY_GAP;
/// Marks per stimulus.
pub const N_MARKS: usize = 30;
/// Distinct mark types (size or lightness steps).
pub const N_LEVELS: usize = 7;
/// Mark centers stay this far from the region edges.
pub const INSET: f64 = MAX_MARK_RADIUS + 0.5;

/// A position in data space: origin bottom-left, y grows upward.
///
/// Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn center() -> Self {
        Self::new(REGION_PX / 2.0, REGION_PX / 2.0)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn in_region(&self) -> bool {
        (0.0..=REGION_PX).contains(&self.x) && (0.0..=REGION_PX).contains(&self.y)
    }

    pub fn clamp_to_region(self) -> Self {
        Self::new(self.x.clamp(0.0, REGION_PX), self.y.clamp(0.0, REGION_PX))
    }

    pub fn translate(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.2}, {:.2})", self.x, self.y)
    }
}

/// Arithmetic mean of a non-empty point set.
pub fn centroid(points: &[Point]) -> Option<Point> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Some(Point::new(sx / n, sy / n))
}

/// Diagonal along which the larger/darker marks concentrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    NE,
    NW,
    SE,
    SW,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::NE, Direction::NW, Direction::SE, Direction::SW];

    /// Axis signs `(sx, sy)` in data space.
    pub fn signs(self) -> (f64, f64) {
        match self {
            Direction::NE => (1.0, 1.0),
            Direction::NW => (-1.0, 1.0),
            Direction::SE => (1.0, -1.0),
            Direction::SW => (-1.0, -1.0),
        }
    }

    pub fn unit_vector(self) -> [f64; 2] {
        let (sx, sy) = self.signs();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        [sx * h, sy * h]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::NE => "NE",
            Direction::NW => "NW",
            Direction::SE => "SE",
            Direction::SW => "SW",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_center_distance_is_48() {
        assert_eq!(MIN_CENTER_DIST, 48.0);
    }

    #[test]
    fn point_serializes_as_pair() {
        let s = serde_json::to_string(&Point::new(1.5, 2.0)).unwrap();
        assert_eq!(s, "[1.5,2.0]");
        let p: Point = serde_json::from_str("[3,4]").unwrap();
        assert_eq!(p, Point::new(3.0, 4.0));
    }

    #[test]
    fn direction_vectors_are_unit_diagonals() {
        for d in Direction::ALL {
            let [x, y] = d.unit_vector();
            assert!((x.hypot(y) - 1.0).abs() < 1e-12);
            assert!((x.abs() - y.abs()).abs() < 1e-12);
        }
    }
}
