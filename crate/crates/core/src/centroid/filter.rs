use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::N_LEVELS;

/// Weight tolerance for the sum-to-one constraint.
const SUM_TOLERANCE: f64 = 1e-9;

/// Relative weight of each mark level; sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AttentionFilter {
    weights: [f64; N_LEVELS],
}

/// Weight every level would carry if all marks counted equally.
pub fn equal_weight_baseline() -> f64 {
    1.0 / N_LEVELS as f64
}

impl AttentionFilter {
    pub fn new(weights: [f64; N_LEVELS]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("attention filter"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParams(format!("filter weights sum to {sum}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Divide by the sum. Negative entries survive.
    pub fn normalized(raw: [f64; N_LEVELS]) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() || sum.abs() < 1e-300 {
            return Err(Error::InvalidParams("filter weights sum to zero".into()));
        }
        Self::new(raw.map(|w| w / sum))
    }

    pub fn uniform() -> Self {
        Self {
            weights: [equal_weight_baseline(); N_LEVELS],
        }
    }

    pub fn one_hot(level: u8) -> Self {
        let mut weights = [0.0; N_LEVELS];
        weights[level as usize] = 1.0;
        Self { weights }
    }

    /// `(1 + level)^exponent`, normalized: more weight on larger/darker marks.
    pub fn salience(exponent: f64) -> Self {
        let mut raw = [0.0; N_LEVELS];
        for (i, w) in raw.iter_mut().enumerate() {
            *w = (1.0 + i as f64).powf(exponent);
        }
        Self::normalized(raw).expect("positive weights")
    }

    pub fn weight(&self, level: u8) -> f64 {
        self.weights[level as usize]
    }

    pub fn weights(&self) -> &[f64; N_LEVELS] {
        &self.weights
    }

    pub fn has_negative(&self) -> bool {
        self.weights.iter().any(|&w| w < 0.0)
    }
}

impl TryFrom<Vec<f64>> for AttentionFilter {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; N_LEVELS] = v
            .try_into()
            .map_err(|v: Vec<f64>| Error::InvalidParams(format!("filter needs {N_LEVELS} weights, got {}", v.len())))?;
        Self::new(arr)
    }
}

impl From<AttentionFilter> for Vec<f64> {
    fn from(f: AttentionFilter) -> Self {
        f.weights.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_one_seventh() {
        assert!((equal_weight_baseline() - 0.142_857_142_857).abs() < 1e-12);
        assert_eq!(format!("{:.2}%", 100.0 * equal_weight_baseline()), "14.29%");
    }

    #[test]
    fn sum_checked() {
        assert!(AttentionFilter::new([0.2; 7]).is_err());
        assert!(AttentionFilter::normalized([0.2; 7]).is_ok());
        let neg = AttentionFilter::normalized([-0.1, 0.2, 0.2, 0.2, 0.2, 0.2, 0.1]).unwrap();
        assert!(neg.has_negative());
    }

    #[test]
    fn salience_increases() {
        let f = AttentionFilter::salience(1.5);
        for w in f.weights().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn serde_as_array() {
        let f = AttentionFilter::uniform();
        let s = serde_json::to_string(&f).unwrap();
        let back: AttentionFilter = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<AttentionFilter>("[1.0]").is_err());
    }
}
