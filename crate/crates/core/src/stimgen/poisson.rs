//! Bridson dart throwing over the inset region, then a seeded subset of the
//! maximal set. Taking a random subset of a maximal Poisson-disk set keeps the
//! minimum-distance guarantee while spreading the points over the whole
//! region (stopping Bridson early grows a compact blob around the seed point).

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, INSET};
use crate::rng::{derive_seed, rng_from_seed, StreamRng};

/// Candidate attempts per active sample.
const BRIDSON_K: usize = 30;
/// Full restarts before reporting infeasible packing.
pub const MAX_RESTARTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGrid {
    pub points: Vec<Point>,
    pub seed: u64,
    pub region_px: f64,
}

impl PointGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest pairwise center distance (infinite for fewer than two points).
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }

    /// Reflect across the vertical midline. Flips the sign of the x/y correlation.
    pub fn mirrored_x(&self) -> PointGrid {
        PointGrid {
            points: self
                .points
                .iter()
                .map(|p| Point::new(self.region_px - p.x, p.y))
                .collect(),
            seed: self.seed,
            region_px: self.region_px,
        }
    }
}

pub fn generate_point_grid(
    seed: u64,
    n_points: usize,
    region_px: f64,
    min_center_dist: f64,
) -> Result<PointGrid> {
    if n_points == 0 {
        return Err(Error::InvalidParams("n_points must be >= 1".into()));
    }
    if !min_center_dist.is_finite() || min_center_dist <= 0.0 {
        return Err(Error::InvalidParams("min_center_dist must be > 0".into()));
    }
    let (lo, hi) = (INSET, region_px - INSET);
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::InvalidParams(format!(
            "region {region_px}px leaves no room inside the mark inset"
        )));
    }

    for attempt in 0..MAX_RESTARTS {
        let mut rng = rng_from_seed(derive_seed(seed, attempt as u64));
        let maximal = bridson(&mut rng, lo, hi, min_center_dist);
        if maximal.len() >= n_points {
            let mut chosen: Vec<usize> = index::sample(&mut rng, maximal.len(), n_points).into_vec();
            chosen.sort_unstable();
            return Ok(PointGrid {
                points: chosen.into_iter().map(|i| maximal[i]).collect(),
                seed,
                region_px,
            });
        }
    }
    Err(Error::InfeasiblePacking {
        n_points,
        min_dist: min_center_dist,
        restarts: MAX_RESTARTS,
    })
}

fn bridson(rng: &mut StreamRng, lo: f64, hi: f64, r: f64) -> Vec<Point> {
    let width = hi - lo;
    let cell = r / std::f64::consts::SQRT_2;
    let cols = (width / cell).ceil().max(1.0) as usize;
    let mut grid: Vec<Option<usize>> = vec![None; cols * cols];
    let cell_of = |p: Point| -> (usize, usize) {
        let cx = (((p.x - lo) / cell) as usize).min(cols - 1);
        let cy = (((p.y - lo) / cell) as usize).min(cols - 1);
        (cx, cy)
    };

    let mut points = Vec::new();
    let mut active = Vec::new();
    let first = Point::new(rng.random_range(lo..=hi), rng.random_range(lo..=hi));
    let (cx, cy) = cell_of(first);
    grid[cy * cols + cx] = Some(0);
    points.push(first);
    active.push(0usize);

    while !active.is_empty() {
        let slot = rng.random_range(0..active.len());
        let origin = points[active[slot]];
        let mut placed = false;
        for _ in 0..BRIDSON_K {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let radius = rng.random_range(r..2.0 * r);
            let cand = Point::new(origin.x + radius * angle.cos(), origin.y + radius * angle.sin());
            if cand.x < lo || cand.x > hi || cand.y < lo || cand.y > hi {
                continue;
            }
            let (gx, gy) = cell_of(cand);
            let far_enough = (gy.saturating_sub(2)..(gy + 3).min(cols)).all(|yy| {
                (gx.saturating_sub(2)..(gx + 3).min(cols)).all(|xx| match grid[yy * cols + xx] {
                    Some(j) => points[j].distance(&cand) >= r,
                    None => true,
                })
            });
            if far_enough {
                grid[gy * cols + gx] = Some(points.len());
                active.push(points.len());
                points.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            active.swap_remove(slot);
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MIN_CENTER_DIST, REGION_PX};

    fn brute_min_distance(points: &[Point]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..points.len() {
            for j in 0..points.len() {
                if i != j {
                    best = best.min(points[i].distance(&points[j]));
                }
            }
        }
        best
    }

    #[test]
    fn thirty_points_respect_min_distance() {
        let grid = generate_point_grid(42, 30, REGION_PX, MIN_CENTER_DIST).unwrap();
        assert_eq!(grid.len(), 30);
        assert!(brute_min_distance(&grid.points) >= 48.0);
        for p in &grid.points {
            assert!(p.x > 20.0 && p.x < 480.0 && p.y > 20.0 && p.y < 480.0);
        }
    }

    #[test]
    fn single_point() {
        let grid = generate_point_grid(7, 1, REGION_PX, MIN_CENTER_DIST).unwrap();
        assert_eq!(grid.len(), 1);
        assert!(grid.points[0].is_finite());
    }

    #[test]
    fn overpacked_grid_is_infeasible() {
        // 200 disks of radius 24 cover more than the whole 500x500 region.
        assert!(200.0 * std::f64::consts::PI * 24.0f64.powi(2) > 500.0 * 500.0);
        let err = generate_point_grid(1, 200, REGION_PX, MIN_CENTER_DIST).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePacking { n_points: 200, .. }));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_point_grid(9, 30, REGION_PX, MIN_CENTER_DIST).unwrap();
        let b = generate_point_grid(9, 30, REGION_PX, MIN_CENTER_DIST).unwrap();
        let c = generate_point_grid(10, 30, REGION_PX, MIN_CENTER_DIST).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_point_grid(1, 0, REGION_PX, 48.0).is_err());
        assert!(generate_point_grid(1, 5, REGION_PX, 0.0).is_err());
    }

    #[test]
    fn mirroring_preserves_spacing() {
        let g = generate_point_grid(3, 30, REGION_PX, MIN_CENTER_DIST).unwrap();
        let m = g.mirrored_x();
        assert!((g.min_pairwise_distance() - m.min_pairwise_distance()).abs() < 1e-9);
    }
}
