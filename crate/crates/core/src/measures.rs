//! Error magnitude, signed bias along the gradient and bootstrap summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::response::{mark_duplicate_pixels, TrialResponse};
use crate::rng::rng_from_seed;
use crate::stimgen::{CellKey, Channel, CorrelationLevel, RangeClass, StimulusSpec};

pub const MIN_BOOTSTRAP: usize = 1000;
pub const DEFAULT_BOOTSTRAP: usize = 2000;
/// Failed engagement checks at which a session is excluded.
pub const ENGAGEMENT_FAIL_LIMIT: usize = 2;

/// Response minus true mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorVector {
    pub dx: f64,
    pub dy: f64,
    pub magnitude: f64,
}

impl ErrorVector {
    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy, magnitude: dx.hypot(dy) }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::new(a * self.dx, a * self.dy)
    }
}

/// Signed error along the gradient; positive toward larger/darker marks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSample {
    pub signed_projection: f64,
}

pub fn error_vector(response: Point, true_mean: Point) -> ErrorVector {
    ErrorVector::new(response.x - true_mean.x, response.y - true_mean.y)
}

pub fn bias_projection(ev: &ErrorVector, direction: [f64; 2]) -> Result<BiasSample> {
    let norm = direction[0].hypot(direction[1]);
    if norm.is_nan() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitDirection(norm));
    }
    Ok(BiasSample { signed_projection: ev.dx * direction[0] + ev.dy * direction[1] })
}

/// Mean with a percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Percentile bootstrap (2.5%, 97.5%) of the sample mean.
pub fn bootstrap_ci(samples: &[f64], n_boot: usize, seed: u64) -> Result<BootstrapCi> {
    if samples.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: samples.len() });
    }
    if n_boot < MIN_BOOTSTRAP {
        return Err(Error::InvalidParams(format!("n_boot {n_boot} < {MIN_BOOTSTRAP}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bootstrap sample"));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut rng = rng_from_seed(seed);
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    // Rounding can leave a constant sample's resampled means one ulp off.
    let ci_low = quantile_sorted(&means, 0.025).min(mean);
    let ci_high = quantile_sorted(&means, 0.975).max(mean);
    Ok(BootstrapCi { mean, ci_low, ci_high })
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Magnitude,
    Bias,
}

/// One cell of a per-condition chart. Control cells have no range or level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub measure: Measure,
    pub channel: Channel,
    pub range_class: Option<RangeClass>,
    pub correlation: Option<CorrelationLevel>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl ConditionSummary {
    pub fn is_control(&self) -> bool {
        self.range_class.is_none()
    }

    pub fn cell(&self) -> CellKey {
        match (self.range_class, self.correlation) {
            (Some(r), Some(c)) => CellKey::Test(r, c),
            _ => CellKey::Control,
        }
    }

    /// Half-width of the interval.
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

impl fmt::Display for ConditionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}px ± {:.1}", self.mean, self.half_width())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub n_boot: usize,
    pub seed: u64,
    /// Drop back-to-back same-pixel clicks.
    pub exclude_duplicates: bool,
    /// Drop sessions with too many failed engagement checks.
    pub exclude_disengaged: bool,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self { n_boot: DEFAULT_BOOTSTRAP, seed: 0, exclude_duplicates: true, exclude_disengaged: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub sessions_total: usize,
    pub sessions_excluded: usize,
    pub responses_formal: usize,
    pub responses_excluded_session: usize,
    pub responses_duplicate_pixel: usize,
    pub responses_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetadata {
    pub ci_method: String,
    pub bootstrap_unit: String,
    pub confidence: f64,
    pub n_boot: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summaries: Vec<ConditionSummary>,
    pub exclusions: ExclusionCounts,
    pub metadata: SummaryMetadata,
}

impl Report {
    pub fn find(&self, measure: Measure, channel: Channel, cell: CellKey) -> Option<&ConditionSummary> {
        self.summaries
            .iter()
            .find(|s| s.measure == measure && s.channel == channel && s.cell() == cell)
    }
}

/// Sessions with `excluded` set or at least two failed engagement checks.
pub fn excluded_sessions(responses: &[TrialResponse]) -> BTreeSet<String> {
    let mut fails: HashMap<&str, usize> = HashMap::new();
    let mut out = BTreeSet::new();
    for r in responses {
        if r.excluded {
            out.insert(r.session_id.clone());
        }
        if r.is_engagement && r.engagement_pass == Some(false) {
            *fails.entry(&r.session_id).or_default() += 1;
        }
    }
    out.extend(
        fails
            .into_iter()
            .filter(|&(_, n)| n >= ENGAGEMENT_FAIL_LIMIT)
            .map(|(s, _)| s.to_string()),
    );
    out
}

/// Formal responses that survive the exclusion rules, in input order.
pub fn apply_exclusions(responses: &[TrialResponse], options: &SummaryOptions) -> (Vec<TrialResponse>, ExclusionCounts) {
    let mut flagged = responses.to_vec();
    if options.exclude_duplicates {
        let original: Vec<bool> = flagged.iter().map(|r| r.duplicate_pixel).collect();
        mark_duplicate_pixels(&mut flagged);
        for (r, was) in flagged.iter_mut().zip(original) {
            r.duplicate_pixel |= was;
        }
    }
    let excluded = if options.exclude_disengaged { excluded_sessions(responses) } else { BTreeSet::new() };
    let sessions: BTreeSet<&str> = responses.iter().map(|r| r.session_id.as_str()).collect();
    let mut counts = ExclusionCounts {
        sessions_total: sessions.len(),
        sessions_excluded: excluded.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for r in flagged.into_iter().filter(|r| r.is_formal()) {
        counts.responses_formal += 1;
        if excluded.contains(&r.session_id) {
            counts.responses_excluded_session += 1;
        } else if options.exclude_duplicates && r.duplicate_pixel {
            counts.responses_duplicate_pixel += 1;
        } else {
            counts.responses_used += 1;
            kept.push(r);
        }
    }
    (kept, counts)
}

/// Pair every response with its stimulus.
pub fn join_trials<'a>(
    responses: &'a [TrialResponse],
    stimuli: &'a [StimulusSpec],
) -> Result<Vec<(&'a StimulusSpec, &'a TrialResponse)>> {
    let by_id: HashMap<&str, &StimulusSpec> = stimuli.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut orphans = Vec::new();
    let mut out = Vec::with_capacity(responses.len());
    for r in responses {
        match by_id.get(r.stimulus_id.as_str()) {
            Some(s) => out.push((*s, r)),
            None => orphans.push(format!("{}#{}:{}", r.session_id, r.trial_index, r.stimulus_id)),
        }
    }
    if !orphans.is_empty() {
        return Err(Error::OrphanResponses(orphans));
    }
    Ok(out)
}

/// Per-cell magnitude and bias summaries of the formal responses.
///
/// Exclusions are applied first. Every remaining formal response must join
/// to a stimulus in `stimuli`.
pub fn summarize(
    responses: &[TrialResponse],
    stimuli: &[StimulusSpec],
    options: &SummaryOptions,
) -> Result<Report> {
    let (kept, counts) = apply_exclusions(responses, options);
    let trials = join_trials(&kept, stimuli)?;
    let mut cells: BTreeMap<(Channel, CellKey), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (s, r) in trials {
        let ev = error_vector(r.click, s.true_mean);
        let entry = cells.entry((s.channel(), CellKey::of(s))).or_default();
        entry.0.push(ev.magnitude);
        if !s.is_control {
            entry.1.push(bias_projection(&ev, s.gradient())?.signed_projection);
        }
    }

    let mut summaries = Vec::new();
    for (i, ((channel, cell), (mags, biases))) in cells.iter().enumerate() {
        let (range_class, correlation) = match *cell {
            CellKey::Test(r, c) => (Some(r), Some(c)),
            CellKey::Control => (None, None),
        };
        for (measure, values) in [(Measure::Magnitude, mags), (Measure::Bias, biases)] {
            if values.is_empty() {
                continue;
            }
            let seed = crate::rng::derive_seed_path(options.seed, &[i as u64, measure as u64]);
            let ci = if values.len() == 1 {
                BootstrapCi { mean: values[0], ci_low: values[0], ci_high: values[0] }
            } else {
                bootstrap_ci(values, options.n_boot, seed)?
            };
            summaries.push(ConditionSummary {
                measure,
                channel: *channel,
                range_class,
                correlation,
                mean: ci.mean,
                ci_low: ci.ci_low,
                ci_high: ci.ci_high,
                n: values.len(),
            });
        }
    }
    summaries.sort_by_key(|s| (s.measure, s.channel, s.cell()));

    Ok(Report {
        summaries,
        exclusions: counts,
        metadata: SummaryMetadata {
            ci_method: "percentile".into(),
            bootstrap_unit: "trials".into(),
            confidence: 0.95,
            n_boot: options.n_boot,
            seed: options.seed,
        },
    })
}
