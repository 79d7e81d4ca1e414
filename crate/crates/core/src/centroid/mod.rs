//! Centroid-method model of perceived mean position.
//!
//! A response to trial `t` is modeled per axis as
//! `R = V * mu_w + (1 - V) * default + Q`, where `mu_w` is the mean of the
//! mark positions weighted by the attention filter `w(level)`, `V` is the
//! Data-Drivenness and `Q` is isotropic Gaussian response noise.

mod efficiency;
mod fieller;
mod filter;
mod fit;

pub use efficiency::{efficiency, DeletionStep, EfficiencyOptions, EfficiencyResult};
pub use fieller::{
    compare_to_baseline, fieller_interval, fieller_ratio, t_critical, weight_intervals,
    BaselineComparison, IntervalBounds, WeightInterval,
};
pub use filter::{equal_weight_baseline, AttentionFilter};
pub use fit::{fit, sigma_hat, CentroidFit, FitOptions, N_PARAMS};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::stimgen::StimulusSpec;

/// Anything that fixes a filter, a Data-Drivenness and a default location.
pub trait ResponseModel {
    fn filter(&self) -> &AttentionFilter;
    fn data_drivenness(&self) -> f64;
    fn default_point(&self) -> Point;
}

/// Filter-weighted mean of the mark positions.
pub fn weighted_mean(stimulus: &StimulusSpec, filter: &AttentionFilter) -> Result<Point> {
    weighted_mean_of(stimulus.marks(), filter)
}

pub(crate) fn weighted_mean_of(
    marks: impl Iterator<Item = (Point, u8)>,
    filter: &AttentionFilter,
) -> Result<Point> {
    let (mut n, mut sw, mut sx, mut sy) = (0usize, 0.0, 0.0, 0.0);
    let (mut px, mut py) = (0.0, 0.0);
    let mut first_w = None;
    let mut equal = true;
    for (p, level) in marks {
        let w = filter.weight(level);
        equal &= *first_w.get_or_insert(w) == w;
        n += 1;
        sw += w;
        sx += w * p.x;
        sy += w * p.y;
        px += p.x;
        py += p.y;
    }
    match first_w {
        // Equal weights cancel; the plain sum avoids weight rounding.
        Some(w) if equal && w != 0.0 => Ok(Point::new(px / n as f64, py / n as f64)),
        _ if sw == 0.0 || !sw.is_finite() => Err(Error::ZeroDenominator),
        _ => Ok(Point::new(sx / sw, sy / sw)),
    }
}

/// Noise-free model response: `V * mu_w + (1 - V) * default`.
pub fn predict_response(stimulus: &StimulusSpec, model: &impl ResponseModel) -> Result<Point> {
    let mu = weighted_mean(stimulus, model.filter())?;
    Ok(blend(mu, model.data_drivenness(), model.default_point()))
}

pub(crate) fn blend(mu: Point, v: f64, default: Point) -> Point {
    Point::new(v * mu.x + (1.0 - v) * default.x, v * mu.y + (1.0 - v) * default.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Direction, REGION_PX};
    use crate::stimgen::{
        encoding_levels, Channel, CorrelationCondition, CorrelationLevel, PointGrid, RangeClass,
    };

    pub(crate) fn toy(points: &[(f64, f64)], levels: &[u8]) -> StimulusSpec {
        let points: Vec<Point> = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let n = points.len() as f64;
        let true_mean = Point::new(
            points.iter().map(|p| p.x).sum::<f64>() / n,
            points.iter().map(|p| p.y).sum::<f64>() / n,
        );
        StimulusSpec {
            id: "toy".into(),
            grid: PointGrid { points, seed: 0, region_px: REGION_PX },
            level_of: levels.to_vec(),
            encoding: encoding_levels(Channel::Size, RangeClass::Wide),
            correlation: CorrelationCondition::new(CorrelationLevel::None, Direction::NE),
            true_mean,
            is_control: false,
        }
    }

    struct Fixed(AttentionFilter, f64, Point);
    impl ResponseModel for Fixed {
        fn filter(&self) -> &AttentionFilter {
            &self.0
        }
        fn data_drivenness(&self) -> f64 {
            self.1
        }
        fn default_point(&self) -> Point {
            self.2
        }
    }

    #[test]
    fn uniform_is_arithmetic_mean() {
        let s = toy(&[(0.0, 0.0), (10.0, 10.0)], &[0, 5]);
        let m = weighted_mean(&s, &AttentionFilter::uniform()).unwrap();
        assert_eq!(m, Point::new(5.0, 5.0));
    }

    #[test]
    fn all_weight_on_level_six() {
        let s = toy(&[(0.0, 0.0), (6.0, 0.0), (0.0, 6.0), (100.0, 100.0)], &[6, 6, 6, 2]);
        let f = AttentionFilter::one_hot(6);
        let m = weighted_mean(&s, &f).unwrap();
        assert!((m.x - 2.0).abs() < 1e-12 && (m.y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn half_and_half() {
        let s = toy(&[(0.0, 0.0), (100.0, 100.0)], &[0, 6]);
        let f = AttentionFilter::new([0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(weighted_mean(&s, &f).unwrap(), Point::new(50.0, 50.0));
    }

    #[test]
    fn zero_denominator() {
        let s = toy(&[(0.0, 0.0), (100.0, 100.0)], &[0, 6]);
        let f = AttentionFilter::new([0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let absent = toy(&[(0.0, 0.0)], &[3]);
        assert!(matches!(weighted_mean(&absent, &f), Err(Error::ZeroDenominator)));
        let neg = AttentionFilter::new([-0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5]).unwrap();
        assert!(matches!(weighted_mean(&s, &neg), Err(Error::ZeroDenominator)));
    }

    #[test]
    fn prediction_blend() {
        let s = toy(&[(300.0, 200.0)], &[3]);
        let f = AttentionFilter::uniform();
        let d = Point::new(250.0, 250.0);
        let p = predict_response(&s, &Fixed(f.clone(), 0.7, d)).unwrap();
        assert!((p.x - 285.0).abs() < 1e-9 && (p.y - 215.0).abs() < 1e-9);
        assert_eq!(predict_response(&s, &Fixed(f.clone(), 1.0, d)).unwrap(), Point::new(300.0, 200.0));
        assert_eq!(predict_response(&s, &Fixed(f, 0.0, d)).unwrap(), d);
    }
}
