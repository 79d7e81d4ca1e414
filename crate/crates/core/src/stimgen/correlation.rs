use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{Direction, Point, N_LEVELS};
use crate::rng::{derive_seed, rng_from_seed};

use super::poisson::PointGrid;

/// Allowed deviation of the realized correlation from its target.
pub const RHO_TOLERANCE: f64 = 0.05;
/// The swap search stops once both correlations sit this far inside the band.
const INNER_MARGIN: f64 = 0.01;
const MAX_SWAPS: usize = 10_000;
const MAX_RESTARTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationLevel {
    None,
    Low,
    High,
}

impl CorrelationLevel {
    pub const ALL: [CorrelationLevel; 3] =
        [CorrelationLevel::None, CorrelationLevel::Low, CorrelationLevel::High];

    pub fn target_rho(self) -> f64 {
        match self {
            CorrelationLevel::None => 0.0,
            CorrelationLevel::Low => 0.4,
            CorrelationLevel::High => 0.8,
        }
    }

    pub fn from_target(rho: f64) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|l| (l.target_rho() - rho).abs() < 1e-9)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationLevel::None => "none",
            CorrelationLevel::Low => "low",
            CorrelationLevel::High => "high",
        }
    }
}

impl fmt::Display for CorrelationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCondition {
    pub level: CorrelationLevel,
    pub direction: Direction,
}

impl CorrelationCondition {
    pub fn new(level: CorrelationLevel, direction: Direction) -> Self {
        Self { level, direction }
    }

    pub fn target_rho(&self) -> f64 {
        self.level.target_rho()
    }

    pub fn tolerance(&self) -> f64 {
        RHO_TOLERANCE
    }
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: a.len(),
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // Relative threshold: a constant list can leave rounding dust in saa.
    let scale_a = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let scale_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if saa <= 1e-24 * scale_a * scale_a * n || sbb <= 1e-24 * scale_b * scale_b * n {
        return Err(Error::DegenerateVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlations of level with x and y after orienting both axes so that
/// positive values mean "levels increase toward `direction`".
pub fn oriented_correlations(
    points: &[Point],
    levels: &[u8],
    direction: Direction,
) -> Result<(f64, f64)> {
    let (sx, sy) = direction.signs();
    let xs: Vec<f64> = points.iter().map(|p| sx * p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| sy * p.y).collect();
    let ls: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
    Ok((pearson(&xs, &ls)?, pearson(&ys, &ls)?))
}

/// Near-equal group sizes covering all seven levels; the remainder goes to
/// the central levels first.
pub fn balanced_level_counts(n: usize) -> [usize; N_LEVELS] {
    let mut counts = [n / N_LEVELS; N_LEVELS];
    const CENTER_OUT: [usize; N_LEVELS] = [3, 2, 4, 1, 5, 0, 6];
    for &lvl in CENTER_OUT.iter().take(n % N_LEVELS) {
        counts[lvl] += 1;
    }
    counts
}

fn level_multiset(n: usize) -> Vec<u8> {
    balanced_level_counts(n)
        .iter()
        .enumerate()
        .flat_map(|(lvl, &c)| std::iter::repeat_n(lvl as u8, c))
        .collect()
}

/// Assign one of seven levels to every grid point.
///
/// `None` is a seeded shuffle of a balanced level multiset. `Low`/`High`
/// start from the binned diagonal projection and apply seeded pairwise swaps
/// until both oriented correlations enter `target ± 0.05`. Swaps keep the
/// level multiset, so every level stays present.
pub fn assign_levels(
    grid: &PointGrid,
    condition: CorrelationCondition,
    seed: u64,
) -> Result<Vec<u8>> {
    let n = grid.points.len();
    if n < N_LEVELS {
        return Err(Error::InvalidStimulus(format!(
            "grid of {n} points cannot hold all {N_LEVELS} levels"
        )));
    }
    let mut base = level_multiset(n);

    if condition.level == CorrelationLevel::None {
        let mut rng = rng_from_seed(seed);
        base.shuffle(&mut rng);
        return Ok(base);
    }

    let target = condition.target_rho();
    let (sx, sy) = condition.direction.signs();
    let u: Vec<f64> = grid.points.iter().map(|p| sx * p.x).collect();
    let v: Vec<f64> = grid.points.iter().map(|p| sy * p.y).collect();
    let uc = standardize(&u).ok_or(Error::DegenerateVariance)?;
    let vc = standardize(&v).ok_or(Error::DegenerateVariance)?;
    // Centered levels have a fixed norm under swaps.
    let lmean = base.iter().map(|&l| l as f64).sum::<f64>() / n as f64;
    let lnorm = base
        .iter()
        .map(|&l| (l as f64 - lmean).powi(2))
        .sum::<f64>()
        .sqrt();

    let inner = RHO_TOLERANCE - INNER_MARGIN;
    for restart in 0..MAX_RESTARTS {
        let mut rng = rng_from_seed(derive_seed(seed, restart as u64));
        let jitter = 0.25 * restart as f64;
        let score: Vec<f64> = (0..n)
            .map(|i| {
                let noise: f64 = rng.sample(StandardNormal);
                uc[i] + vc[i] + jitter * noise
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
        let mut levels = vec![0u8; n];
        for (&idx, &lvl) in order.iter().zip(&base) {
            levels[idx] = lvl;
        }

        let mut su: f64 = uc.iter().zip(&levels).map(|(a, &l)| a * l as f64).sum();
        let mut sv: f64 = vc.iter().zip(&levels).map(|(a, &l)| a * l as f64).sum();
        let rho = |s: f64| s / lnorm;
        let objective = |a: f64, b: f64| (rho(a) - target).powi(2) + (rho(b) - target).powi(2);

        for _ in 0..MAX_SWAPS {
            if (rho(su) - target).abs() <= inner && (rho(sv) - target).abs() <= inner {
                break;
            }
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if levels[i] == levels[j] {
                continue;
            }
            let dl = levels[j] as f64 - levels[i] as f64;
            let nu = su + (uc[i] - uc[j]) * dl;
            let nv = sv + (vc[i] - vc[j]) * dl;
            if objective(nu, nv) < objective(su, sv) {
                levels.swap(i, j);
                su = nu;
                sv = nv;
            }
        }

        let (rx, ry) = oriented_correlations(&grid.points, &levels, condition.direction)?;
        if (rx - target).abs() <= RHO_TOLERANCE && (ry - target).abs() <= RHO_TOLERANCE {
            return Ok(levels);
        }
    }
    Err(Error::CorrelationExhausted {
        target,
        tolerance: RHO_TOLERANCE,
        attempts: MAX_RESTARTS,
    })
}

/// Centered values scaled to unit norm.
fn standardize(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let norm = centered.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm <= 1e-9 {
        return None;
    }
    Some(centered.into_iter().map(|c| c / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MIN_CENTER_DIST, REGION_PX};
    use crate::stimgen::pool::grid_for_condition;
    use crate::stimgen::generate_point_grid;

    #[test]
    fn pearson_identical_and_reversed() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_computed() {
        // means 2.5; deviations (-1.5,-0.5,0.5,1.5) and (-1.5,0.5,-0.5,1.5):
        // cov sum 2.25-0.25-0.25+2.25 = 4, both variance sums 5 -> 0.8
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateVariance)
        ));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::TooFewValues { .. })));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn balanced_counts_cover_all_levels() {
        let c = balanced_level_counts(30);
        assert_eq!(c.iter().sum::<usize>(), 30);
        assert!(c.iter().all(|&k| k >= 4));
    }

    #[test]
    fn high_ne_within_band() {
        let cond = CorrelationCondition::new(CorrelationLevel::High, Direction::NE);
        let grid = grid_for_condition(3, cond).unwrap();
        let levels = assign_levels(&grid, cond, 3).unwrap();
        let (rx, ry) = oriented_correlations(&grid.points, &levels, Direction::NE).unwrap();
        assert!((0.75..=0.85).contains(&rx), "rx={rx}");
        assert!((0.75..=0.85).contains(&ry), "ry={ry}");
    }

    #[test]
    fn low_sw_within_band() {
        let grid = generate_point_grid(9, 30, REGION_PX, MIN_CENTER_DIST).unwrap();
        let cond = CorrelationCondition::new(CorrelationLevel::Low, Direction::SW);
        let levels = assign_levels(&grid, cond, 9).unwrap();
        // Recompute against explicitly sign-flipped axes.
        let xs: Vec<f64> = grid.points.iter().map(|p| -p.x).collect();
        let ys: Vec<f64> = grid.points.iter().map(|p| -p.y).collect();
        let ls: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
        let rx = pearson(&xs, &ls).unwrap();
        let ry = pearson(&ys, &ls).unwrap();
        assert!((0.35..=0.45).contains(&rx), "rx={rx}");
        assert!((0.35..=0.45).contains(&ry), "ry={ry}");
    }

    #[test]
    fn none_is_seeded_shuffle_with_all_levels() {
        let grid = generate_point_grid(5, 30, REGION_PX, MIN_CENTER_DIST).unwrap();
        let cond = CorrelationCondition::new(CorrelationLevel::None, Direction::NE);
        let a = assign_levels(&grid, cond, 5).unwrap();
        let b = assign_levels(&grid, cond, 5).unwrap();
        assert_eq!(a, b);
        for lvl in 0..7u8 {
            assert!(a.contains(&lvl));
        }
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, level_multiset(30));
    }

    #[test]
    fn high_on_uncorrelated_grid_can_exhaust() {
        // A perfectly symmetric lattice has zero x/y correlation, which caps
        // min(rho_x, rho_y) at sqrt(1/2) < 0.75.
        let mut points = Vec::new();
        for i in 0..6 {
            for j in 0..5 {
                points.push(Point::new(50.0 + 80.0 * i as f64, 50.0 + 90.0 * j as f64));
            }
        }
        let grid = PointGrid {
            points,
            seed: 0,
            region_px: 500.0,
        };
        let cond = CorrelationCondition::new(CorrelationLevel::High, Direction::NE);
        assert!(matches!(
            assign_levels(&grid, cond, 1),
            Err(Error::CorrelationExhausted { .. })
        ));
    }
}
