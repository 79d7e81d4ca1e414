//! Synthetic observers used as ground truth for fitting and trend checks.

use rand::seq::IndexedRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::centroid::{blend, weighted_mean, AttentionFilter, ResponseModel};
use crate::error::{Error, Result};
use crate::geometry::{centroid, Point, N_MARKS};
use crate::response::TrialResponse;
use crate::rng::{derive_seed_path, rng_from_seed, tag, StreamRng};
use crate::stimgen::{SessionPlan, Slot, StimulusPool, StimulusSpec};

/// Feature-weighted averaging with a pull toward a default location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedObserverParams {
    pub filter: AttentionFilter,
    pub data_drivenness: f64,
    pub default_point: Point,
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl WeightedObserverParams {
    /// Uniform filter, V = 1, no noise: always clicks the true mean.
    pub fn ideal() -> Self {
        Self {
            filter: AttentionFilter::uniform(),
            data_drivenness: 1.0,
            default_point: Point::center(),
            noise_sd: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.data_drivenness) {
            return Err(Error::InvalidParams(format!(
                "data_drivenness {} outside [0, 1]",
                self.data_drivenness
            )));
        }
        check_noise(self.noise_sd)
    }
}

impl ResponseModel for WeightedObserverParams {
    fn filter(&self) -> &AttentionFilter {
        &self.filter
    }
    fn data_drivenness(&self) -> f64 {
        self.data_drivenness
    }
    fn default_point(&self) -> Point {
        self.default_point
    }
}

/// Averages a salience-biased random subset of `k` marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsamplerParams {
    pub k: usize,
    /// Sampling probability grows as `(1 + level)^salience_exponent`.
    pub salience_exponent: f64,
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SubsamplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > N_MARKS {
            return Err(Error::InvalidParams(format!("k = {} outside [1, {N_MARKS}]", self.k)));
        }
        if self.salience_exponent.is_nan() || self.salience_exponent < 0.0 {
            return Err(Error::InvalidParams("salience_exponent must be >= 0".into()));
        }
        check_noise(self.noise_sd)
    }
}

/// Splits marks into a small/light and a large/dark segment and weights the
/// segment centroids by their (inflated) counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityObserverParams {
    /// Levels `>= split_level` form the large/dark segment.
    pub split_level: u8,
    pub illusion_factor: f64,
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DensityObserverParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.split_level) {
            return Err(Error::InvalidParams(format!("split_level {} outside [1, 6]", self.split_level)));
        }
        if self.illusion_factor.is_nan() || self.illusion_factor < 1.0 {
            return Err(Error::InvalidParams("illusion_factor must be >= 1".into()));
        }
        check_noise(self.noise_sd)
    }
}

fn check_noise(sd: f64) -> Result<()> {
    if !sd.is_finite() || sd < 0.0 {
        return Err(Error::InvalidParams(format!("noise_sd {sd} must be finite and >= 0")));
    }
    Ok(())
}

/// Any of the three strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObserverSpec {
    Weighted(WeightedObserverParams),
    Subsample(SubsamplerParams),
    Density(DensityObserverParams),
}

impl ObserverSpec {
    pub fn seed(&self) -> u64 {
        match self {
            ObserverSpec::Weighted(p) => p.seed,
            ObserverSpec::Subsample(p) => p.seed,
            ObserverSpec::Density(p) => p.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObserverSpec::Weighted(p) => p.validate(),
            ObserverSpec::Subsample(p) => p.validate(),
            ObserverSpec::Density(p) => p.validate(),
        }
    }

    /// Click for `stimulus` drawing randomness from `rng`.
    pub fn respond(&self, stimulus: &StimulusSpec, rng: &mut StreamRng) -> Point {
        let (raw, sd) = match self {
            ObserverSpec::Weighted(p) => (weighted_point(stimulus, p), p.noise_sd),
            ObserverSpec::Subsample(p) => (subsample_point(stimulus, p, rng), p.noise_sd),
            ObserverSpec::Density(p) => (density_point(stimulus, p), p.noise_sd),
        };
        add_noise(raw, sd, rng)
    }
}

fn weighted_point(stimulus: &StimulusSpec, p: &WeightedObserverParams) -> Point {
    // A filter can zero out every level present (e.g. one-hot on a control);
    // the observer then falls back to the unweighted mean.
    let mu = weighted_mean(stimulus, &p.filter).unwrap_or(stimulus.true_mean);
    blend(mu, p.data_drivenness, p.default_point)
}

fn subsample_point(stimulus: &StimulusSpec, p: &SubsamplerParams, rng: &mut StreamRng) -> Point {
    let marks: Vec<(Point, u8)> = stimulus.marks().collect();
    let k = p.k.min(marks.len());
    let chosen: Vec<Point> = marks
        .choose_multiple_weighted(rng, k, |(_, l)| (1.0 + *l as f64).powf(p.salience_exponent))
        .expect("positive finite weights")
        .map(|(pt, _)| *pt)
        .collect();
    centroid(&chosen).unwrap_or(stimulus.true_mean)
}

fn density_point(stimulus: &StimulusSpec, p: &DensityObserverParams) -> Point {
    let (small, large): (Vec<_>, Vec<_>) =
        stimulus.marks().partition(|(_, l)| *l < p.split_level);
    let pts = |v: &[(Point, u8)]| v.iter().map(|(pt, _)| *pt).collect::<Vec<_>>();
    match (centroid(&pts(&small)), centroid(&pts(&large))) {
        (Some(cs), Some(cl)) => {
            let ns = small.len() as f64;
            let nl = large.len() as f64 * p.illusion_factor;
            Point::new((cs.x * ns + cl.x * nl) / (ns + nl), (cs.y * ns + cl.y * nl) / (ns + nl))
        }
        (Some(c), None) | (None, Some(c)) => c,
        (None, None) => stimulus.true_mean,
    }
}

fn add_noise(p: Point, sd: f64, rng: &mut StreamRng) -> Point {
    if sd == 0.0 {
        return p.clamp_to_region();
    }
    let normal = Normal::new(0.0, sd).expect("validated noise sd");
    Point::new(p.x + normal.sample(rng), p.y + normal.sample(rng)).clamp_to_region()
}

fn single_response(stimulus: &StimulusSpec, spec: &ObserverSpec) -> TrialResponse {
    let mut rng = rng_from_seed(spec.seed());
    let click = spec.respond(stimulus, &mut rng);
    TrialResponse::new("sim", 0, stimulus.id.clone(), click, 0.0)
}

pub fn weighted_average_observer(stimulus: &StimulusSpec, params: &WeightedObserverParams) -> TrialResponse {
    single_response(stimulus, &ObserverSpec::Weighted(params.clone()))
}

pub fn subsampling_observer(stimulus: &StimulusSpec, params: &SubsamplerParams) -> TrialResponse {
    single_response(stimulus, &ObserverSpec::Subsample(params.clone()))
}

pub fn density_segment_observer(stimulus: &StimulusSpec, params: &DensityObserverParams) -> TrialResponse {
    single_response(stimulus, &ObserverSpec::Density(params.clone()))
}

/// One response per formal trial of `session`, in session order.
///
/// Trial noise is seeded from (observer seed, session seed, stimulus id), so
/// results do not depend on evaluation order.
pub fn simulate_experiment(
    observer: &ObserverSpec,
    session: &SessionPlan,
    pool: &StimulusPool,
) -> Result<Vec<TrialResponse>> {
    observer.validate()?;
    let session_id = format!("sim-{:016x}", session.seed);
    let mut out = Vec::with_capacity(session.formal.len());
    for slot in session.slots().iter().enumerate() {
        let (trial_index, Slot::Formal { stimulus_id, .. }) = slot else { continue };
        let stimulus = pool
            .get(stimulus_id)
            .ok_or_else(|| Error::UnknownStimulus(stimulus_id.to_string()))?;
        let mut rng = rng_from_seed(derive_seed_path(
            observer.seed(),
            &[session.seed, tag(stimulus_id), trial_index as u64],
        ));
        let click = observer.respond(stimulus, &mut rng);
        out.push(TrialResponse::new(session_id.clone(), trial_index, *stimulus_id, click, 0.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centroid::weighted_mean;
    use crate::stimgen::{plan_session, Channel, CorrelationLevel, PoolConfig};
    use std::sync::OnceLock;

    fn pool() -> &'static StimulusPool {
        static POOL: OnceLock<StimulusPool> = OnceLock::new();
        POOL.get_or_init(|| {
            let cfg = PoolConfig { per_cell: 6, controls: 6, training_per_cell: 2 };
            StimulusPool::generate(3, Channel::Size, cfg).unwrap()
        })
    }

    fn high() -> &'static StimulusSpec {
        pool()
            .stimuli()
            .iter()
            .find(|s| s.correlation.level == CorrelationLevel::High && !s.is_control)
            .unwrap()
    }

    #[test]
    fn neutral_observers_return_true_mean() {
        for s in pool().stimuli().iter().take(20) {
            let w = weighted_average_observer(s, &WeightedObserverParams::ideal()).click;
            assert!(w.distance(&s.true_mean) < 1e-9);
            let sub = SubsamplerParams { k: 30, salience_exponent: 2.0, noise_sd: 0.0, seed: 4 };
            assert!(subsampling_observer(s, &sub).click.distance(&s.true_mean) < 1e-9);
            let d = DensityObserverParams { split_level: 4, illusion_factor: 1.0, noise_sd: 0.0, seed: 1 };
            assert!(density_segment_observer(s, &d).click.distance(&s.true_mean) < 1e-9);
        }
    }

    #[test]
    fn default_dominated() {
        let p = WeightedObserverParams { data_drivenness: 0.0, ..WeightedObserverParams::ideal() };
        assert_eq!(weighted_average_observer(high(), &p).click, Point::new(250.0, 250.0));
    }

    #[test]
    fn one_hot_level_six_is_subset_centroid() {
        let s = high();
        let subset: Vec<Point> = s.marks().filter(|(_, l)| *l == 6).map(|(p, _)| p).collect();
        let expected = centroid(&subset).unwrap();
        let p = WeightedObserverParams { filter: AttentionFilter::one_hot(6), ..WeightedObserverParams::ideal() };
        assert!(weighted_average_observer(s, &p).click.distance(&expected) < 1e-9);
    }

    #[test]
    fn single_draw_hits_a_mark() {
        let s = high();
        let p = SubsamplerParams { k: 1, salience_exponent: 0.0, noise_sd: 0.0, seed: 9 };
        let click = subsampling_observer(s, &p).click;
        assert!(s.points().iter().any(|q| q.distance(&click) < 1e-9));
    }

    #[test]
    fn salient_subsampling_drifts_toward_gradient() {
        let s = high();
        let p = SubsamplerParams { k: 5, salience_exponent: 2.0, noise_sd: 0.0, seed: 0 };
        let spec = ObserverSpec::Subsample(p);
        let g = s.gradient();
        let reps = 10_000;
        let mut proj = 0.0;
        for i in 0..reps {
            let mut rng = rng_from_seed(i);
            let c = spec.respond(s, &mut rng);
            proj += (c.x - s.true_mean.x) * g[0] + (c.y - s.true_mean.y) * g[1];
        }
        assert!(proj / reps as f64 > 5.0, "mean projection {}", proj / reps as f64);
    }

    #[test]
    fn density_closed_form() {
        let s = high();
        let p = DensityObserverParams { split_level: 4, illusion_factor: 2.0, noise_sd: 0.0, seed: 0 };
        let small: Vec<Point> = s.marks().filter(|(_, l)| *l < 4).map(|(q, _)| q).collect();
        let large: Vec<Point> = s.marks().filter(|(_, l)| *l >= 4).map(|(q, _)| q).collect();
        let (cs, cl) = (centroid(&small).unwrap(), centroid(&large).unwrap());
        let (ns, nl) = (small.len() as f64, 2.0 * large.len() as f64);
        let expected = Point::new((cs.x * ns + cl.x * nl) / (ns + nl), (cs.y * ns + cl.y * nl) / (ns + nl));
        let click = density_segment_observer(s, &p).click;
        assert!(click.distance(&expected) < 1e-9);
        // Pulled from the true mean toward the large segment.
        assert!(click.distance(&cl) < s.true_mean.distance(&cl));
    }

    #[test]
    fn density_empty_segment() {
        let control = pool().stimuli().iter().find(|s| s.is_control).unwrap();
        let p = DensityObserverParams { split_level: 5, illusion_factor: 3.0, noise_sd: 0.0, seed: 0 };
        assert!(density_segment_observer(control, &p).click.distance(&control.true_mean) < 1e-9);
    }

    #[test]
    fn responses_stay_in_region() {
        let p = WeightedObserverParams { noise_sd: 400.0, seed: 2, ..WeightedObserverParams::ideal() };
        let spec = ObserverSpec::Weighted(p);
        let mut rng = rng_from_seed(5);
        for s in pool().stimuli() {
            assert!(spec.respond(s, &mut rng).in_region());
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let plan = plan_session(pool(), 12).unwrap();
        let spec = ObserverSpec::Weighted(WeightedObserverParams { noise_sd: 10.0, seed: 3, ..WeightedObserverParams::ideal() });
        let a = simulate_experiment(&spec, &plan, pool()).unwrap();
        let b = simulate_experiment(&spec, &plan, pool()).unwrap();
        assert_eq!(a.len(), 60);
        assert_eq!(a, b);
        let ideal = ObserverSpec::Weighted(WeightedObserverParams::ideal());
        for r in simulate_experiment(&ideal, &plan, pool()).unwrap() {
            let s = pool().get(&r.stimulus_id).unwrap();
            assert!(r.click.distance(&s.true_mean) < 1e-9);
            assert!(r.is_formal());
        }
    }

    #[test]
    fn missing_stimulus() {
        let mut plan = plan_session(pool(), 1).unwrap();
        plan.formal[0] = "nope".into();
        let ideal = ObserverSpec::Weighted(WeightedObserverParams::ideal());
        assert!(matches!(simulate_experiment(&ideal, &plan, pool()), Err(Error::UnknownStimulus(_))));
    }

    #[test]
    fn weighted_uses_filter_mean() {
        let s = high();
        let f = AttentionFilter::salience(1.0);
        let p = WeightedObserverParams { filter: f.clone(), ..WeightedObserverParams::ideal() };
        let mu = weighted_mean(s, &f).unwrap();
        assert!(weighted_average_observer(s, &p).click.distance(&mu) < 1e-9);
    }
}
