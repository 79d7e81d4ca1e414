//! Fieller confidence intervals for the normalized weights
//! `w_k = h_k / sum_j h_j`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::geometry::N_LEVELS;

use super::filter::equal_weight_baseline;
use super::fit::CentroidFit;

pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IntervalBounds {
    Bounded { lower: f64, upper: f64 },
    /// The denominator is not significantly different from zero; the
    /// confidence set is not a finite interval.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightInterval {
    pub level: u8,
    pub point_estimate: f64,
    pub bounds: IntervalBounds,
}

impl WeightInterval {
    pub fn lower(&self) -> Option<f64> {
        match self.bounds {
            IntervalBounds::Bounded { lower, .. } => Some(lower),
            IntervalBounds::Unbounded => None,
        }
    }

    pub fn upper(&self) -> Option<f64> {
        match self.bounds {
            IntervalBounds::Bounded { upper, .. } => Some(upper),
            IntervalBounds::Unbounded => None,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match self.bounds {
            IntervalBounds::Bounded { lower, upper } => lower <= value && value <= upper,
            IntervalBounds::Unbounded => true,
        }
    }
}

/// Two-sided Student-t critical value at `df`.
pub fn t_critical(df: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df.max(1) as f64).expect("valid t distribution");
    dist.inverse_cdf(0.5 + CONFIDENCE / 2.0)
}

/// Fieller interval for `num / den` given their variances and covariance.
///
/// The set `{theta : (num - theta den)^2 <= t^2 Var(num - theta den)}` is
/// bounded iff `den^2 / var_den > t^2`; its endpoints are the roots of
/// `(den^2 - t^2 v_dd) theta^2 - 2 (num den - t^2 v_nd) theta + (num^2 - t^2 v_nn)`.
pub fn fieller_ratio(num: f64, den: f64, var_num: f64, var_den: f64, cov: f64, t_crit: f64) -> IntervalBounds {
    let t2 = t_crit * t_crit;
    let a = den * den - t2 * var_den;
    if a <= 0.0 {
        return IntervalBounds::Unbounded;
    }
    let b = num * den - t2 * cov;
    let c = num * num - t2 * var_num;
    let disc = (b * b - a * c).max(0.0);
    let root = disc.sqrt();
    IntervalBounds::Bounded {
        lower: (b - root) / a,
        upper: (b + root) / a,
    }
}

/// 95% Fieller interval for the weight of `level`.
pub fn fieller_interval(fit: &CentroidFit, level: u8) -> Result<WeightInterval> {
    let k = level as usize;
    if k >= N_LEVELS {
        return Err(Error::InvalidParams(format!("level {level} out of range")));
    }
    let cov = &fit.covariance;
    let num = fit.unnormalized[k];
    let den: f64 = fit.unnormalized.iter().sum();
    let var_num = cov[k][k];
    let var_den: f64 = cov.iter().flatten().sum();
    let cov_nd: f64 = cov[k].iter().sum();
    if var_num.is_nan() || var_den.is_nan() || var_num <= 0.0 || var_den <= 0.0 {
        return Err(Error::InvalidParams("covariance is not positive definite".into()));
    }
    Ok(WeightInterval {
        level,
        point_estimate: fit.filter.weight(level),
        bounds: fieller_ratio(num, den, var_num, var_den, cov_nd, t_critical(fit.df)),
    })
}

pub fn weight_intervals(fit: &CentroidFit) -> Result<Vec<WeightInterval>> {
    (0..N_LEVELS as u8).map(|l| fieller_interval(fit, l)).collect()
}

/// Position of a weight interval relative to the equal-weight line (1/7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineComparison {
    SignificantlyAbove,
    SignificantlyBelow,
    NotDistinguishable,
}

pub fn compare_to_baseline(interval: &WeightInterval) -> BaselineComparison {
    let b = equal_weight_baseline();
    match interval.bounds {
        IntervalBounds::Bounded { lower, .. } if lower > b => BaselineComparison::SignificantlyAbove,
        IntervalBounds::Bounded { upper, .. } if upper < b => BaselineComparison::SignificantlyBelow,
        _ => BaselineComparison::NotDistinguishable,
    }
}
