//! Efficiency: the smallest fraction of marks an observer using the fitted
//! filter would need to match the fitted residual spread.
//!
//! For each deletion count N = 1..n-1, N marks are removed uniformly at
//! random from every stimulus (`repetitions` times), the fitted model is
//! re-evaluated on the survivors, and the pooled SD of the displacement from
//! the full-set prediction is recorded. Deleting marks is the only error
//! source in this comparison, so the SD rises with N; the scan stops at the
//! first N whose SD exceeds `sigma_hat`, and the last N within it (N*) gives
//! `efficiency = (n - N*) / n`.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::borrow::Borrow;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::N_MARKS;
use crate::response::TrialResponse;
use crate::rng::{derive_seed_path, rng_from_seed};
use crate::stimgen::StimulusSpec;

use super::fit::CentroidFit;
use super::ResponseModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyOptions {
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for EfficiencyOptions {
    fn default() -> Self {
        Self {
            repetitions: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeletionStep {
    pub deleted: usize,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub efficiency: f64,
    pub attended_marks: f64,
    /// Largest deletion count whose SD stays within `sigma_hat`.
    pub max_deleted: usize,
    pub n_marks: usize,
    pub sigma_hat: f64,
    pub deletion_curve: Vec<DeletionStep>,
    pub repetitions: usize,
    pub seed: u64,
}

impl fmt::Display for EfficiencyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.2}% of marks (~{} marks)",
            100.0 * self.efficiency,
            self.attended_marks.round() as i64
        )
    }
}

struct WeightedMarks {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    total: [f64; 3],
}

pub fn efficiency<S, R>(
    fit: &CentroidFit,
    trials: &[(S, R)],
    options: &EfficiencyOptions,
) -> Result<EfficiencyResult>
where
    S: Borrow<StimulusSpec> + Sync,
    R: Borrow<TrialResponse> + Sync,
{
    if trials.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    if options.repetitions == 0 {
        return Err(Error::InvalidParams("repetitions must be >= 1".into()));
    }
    let n_marks = trials[0].0.borrow().points().len();
    if n_marks < 2 || trials.iter().any(|(s, _)| s.borrow().points().len() != n_marks) {
        return Err(Error::InvalidParams(format!(
            "efficiency needs stimuli with a common mark count >= 2 (expected {N_MARKS})"
        )));
    }

    let filter = fit.filter();
    let v = fit.data_drivenness();
    let marks: Vec<WeightedMarks> = trials
        .iter()
        .map(|(s, _)| {
            let s = s.borrow();
            let mut m = WeightedMarks {
                x: Vec::with_capacity(n_marks),
                y: Vec::with_capacity(n_marks),
                w: Vec::with_capacity(n_marks),
                total: [0.0; 3],
            };
            for (p, l) in s.marks() {
                let w = filter.weight(l);
                m.x.push(p.x);
                m.y.push(p.y);
                m.w.push(w);
                m.total[0] += w;
                m.total[1] += w * p.x;
                m.total[2] += w * p.y;
            }
            m
        })
        .collect();
    if marks.iter().any(|m| m.total[0] == 0.0) {
        return Err(Error::ZeroDenominator);
    }

    let deletion_curve: Vec<DeletionStep> = (1..n_marks)
        .into_par_iter()
        .map(|deleted| {
            let mut rng = rng_from_seed(derive_seed_path(options.seed, &[deleted as u64]));
            let (mut n, mut sx, mut sy, mut sxx, mut syy) = (0usize, 0.0, 0.0, 0.0, 0.0);
            for m in &marks {
                let full = [m.total[1] / m.total[0], m.total[2] / m.total[0]];
                for _ in 0..options.repetitions {
                    let mut kept = m.total;
                    for i in index::sample(&mut rng, n_marks, deleted) {
                        kept[0] -= m.w[i];
                        kept[1] -= m.w[i] * m.x[i];
                        kept[2] -= m.w[i] * m.y[i];
                    }
                    if kept[0].abs() <= 1e-12 * m.total[0].abs() {
                        continue;
                    }
                    let dx = v * (kept[1] / kept[0] - full[0]);
                    let dy = v * (kept[2] / kept[0] - full[1]);
                    n += 1;
                    sx += dx;
                    sy += dy;
                    sxx += dx * dx;
                    syy += dy * dy;
                }
            }
            let sd = if n < 2 {
                f64::INFINITY
            } else {
                let nf = n as f64;
                let ss = (sxx - sx * sx / nf) + (syy - sy * sy / nf);
                (ss.max(0.0) / (2.0 * nf - 2.0)).sqrt()
            };
            DeletionStep { deleted, sd }
        })
        .collect();

    let max_deleted = deletion_curve
        .iter()
        .take_while(|step| step.sd <= fit.sigma_hat)
        .last()
        .map_or(0, |step| step.deleted);
    let efficiency = (n_marks - max_deleted) as f64 / n_marks as f64;

    Ok(EfficiencyResult {
        efficiency,
        attended_marks: efficiency * n_marks as f64,
        max_deleted,
        n_marks,
        sigma_hat: fit.sigma_hat,
        deletion_curve,
        repetitions: options.repetitions,
        seed: options.seed,
    })
}
