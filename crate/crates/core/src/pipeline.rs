//! Stage glue: the fit.json schema, perceived-mean prediction and the
//! end-to-end simulated run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::centroid::{
    compare_to_baseline, efficiency, equal_weight_baseline, fit, predict_response,
    weight_intervals, BaselineComparison, CentroidFit, EfficiencyOptions, EfficiencyResult,
    FitOptions, WeightInterval,
};
use crate::chart::emit_condition_chart;
use crate::error::{Error, Result};
use crate::geometry::{Point, N_LEVELS};
use crate::io::{write_json, write_jsonl, write_pool};
use crate::measures::{
    apply_exclusions, bias_projection, error_vector, join_trials, summarize, ErrorVector, Measure,
    Report, SummaryOptions, DEFAULT_BOOTSTRAP,
};
use crate::observer::{simulate_experiment, ObserverSpec};
use crate::render::{emit_svg_with_overlay, Overlay};
use crate::response::TrialResponse;
use crate::rng::{derive_seed_path, tag};
use crate::stimgen::{plan_session, CellKey, Channel, PoolConfig, StimulusPool, StimulusSpec};

pub const FIT_FILE: &str = "fit.json";
pub const REPORT_FILE: &str = "report.json";
pub const RESPONSES_FILE: &str = "responses.ndjson";
pub const SESSIONS_DIR: &str = "sessions";
pub const FIGS_DIR: &str = "figs";
pub const OVERLAYS_DIR: &str = "overlays";
pub const FIT_SCHEMA_VERSION: u32 = 1;

/// Contents of fit.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub schema_version: u32,
    pub channel: Option<Channel>,
    pub weights: [f64; N_LEVELS],
    pub weight_intervals: Vec<WeightInterval>,
    pub baseline: f64,
    pub baseline_comparison: Vec<BaselineComparison>,
    #[serde(rename = "V")]
    pub data_drivenness: f64,
    pub default: Point,
    pub sigma_hat: f64,
    pub df: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyResult>,
    pub model: CentroidFit,
}

impl FitFile {
    pub fn new(model: CentroidFit, efficiency: Option<EfficiencyResult>) -> Result<Self> {
        let weight_intervals = weight_intervals(&model)?;
        Ok(Self {
            schema_version: FIT_SCHEMA_VERSION,
            channel: model.channel,
            weights: *model.filter.weights(),
            baseline_comparison: weight_intervals.iter().map(compare_to_baseline).collect(),
            weight_intervals,
            baseline: equal_weight_baseline(),
            data_drivenness: model.data_drivenness,
            default: model.default_point,
            sigma_hat: model.sigma_hat,
            df: model.df,
            efficiency,
            model,
        })
    }
}

/// Fit the formal, non-excluded responses.
pub fn fit_responses(
    responses: &[TrialResponse],
    stimuli: &[StimulusSpec],
    exclusions: &SummaryOptions,
    options: &FitOptions,
) -> Result<(CentroidFit, Vec<TrialResponse>)> {
    let (kept, _) = apply_exclusions(responses, exclusions);
    let model = {
        let trials = join_trials(&kept, stimuli)?;
        fit(&trials, options)?
    };
    Ok((model, kept))
}

/// Fit plus the Efficiency block, as written to fit.json.
pub fn fit_file(
    responses: &[TrialResponse],
    stimuli: &[StimulusSpec],
    exclusions: &SummaryOptions,
    options: &FitOptions,
    efficiency_options: Option<&EfficiencyOptions>,
) -> Result<FitFile> {
    let (model, kept) = fit_responses(responses, stimuli, exclusions, options)?;
    let eff = match efficiency_options {
        Some(o) => Some(efficiency(&model, &join_trials(&kept, stimuli)?, o)?),
        None => None,
    };
    FitFile::new(model, eff)
}

/// Predicted perceived mean of one stimulus under a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub stimulus_id: String,
    pub predicted: Point,
    pub true_mean: Point,
    pub displacement: ErrorVector,
    /// Displacement along the gradient; absent for controls.
    pub gradient_projection: Option<f64>,
}

pub fn predict(model: &CentroidFit, stimulus: &StimulusSpec) -> Result<Prediction> {
    if let Some(channel) = model.channel {
        if channel != stimulus.channel() {
            return Err(Error::ChannelMismatch { fit: channel.to_string(), stimulus: stimulus.channel().to_string() });
        }
    }
    let predicted = predict_response(stimulus, model)?;
    let displacement = error_vector(predicted, stimulus.true_mean);
    let gradient_projection = if stimulus.is_control {
        None
    } else {
        Some(bias_projection(&displacement, stimulus.gradient())?.signed_projection)
    };
    Ok(Prediction {
        stimulus_id: stimulus.id.clone(),
        predicted,
        true_mean: stimulus.true_mean,
        displacement,
        gradient_projection,
    })
}

pub fn prediction_svg(stimulus: &StimulusSpec, prediction: &Prediction) -> Result<String> {
    emit_svg_with_overlay(
        stimulus,
        &Overlay { predicted: Some(prediction.predicted), true_mean: Some(prediction.true_mean) },
    )
}

/// Write one chart per measure and channel present in `report`.
pub fn write_charts(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for measure in [Measure::Magnitude, Measure::Bias] {
        for channel in Channel::ALL {
            if let Some(svg) = emit_condition_chart(report, measure, channel) {
                let name = match measure {
                    Measure::Magnitude => format!("error-{channel}.svg"),
                    Measure::Bias => format!("bias-{channel}.svg"),
                };
                let path = dir.join(name);
                fs::write(&path, svg)?;
                out.push(path);
            }
        }
    }
    Ok(out)
}

/// Everything the simulated end-to-end run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub channel: Channel,
    #[serde(default)]
    pub pool: PoolConfig,
    pub observer: ObserverSpec,
    pub sessions: usize,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "default_repetitions")]
    pub efficiency_repetitions: usize,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
}

fn default_repetitions() -> usize {
    EfficiencyOptions::default().repetitions
}

fn default_n_boot() -> usize {
    DEFAULT_BOOTSTRAP
}

impl PipelineConfig {
    pub fn new(seed: u64, channel: Channel, observer: ObserverSpec) -> Self {
        Self {
            seed,
            channel,
            pool: PoolConfig::default(),
            observer,
            sessions: 10,
            fit: FitOptions::default(),
            efficiency_repetitions: default_repetitions(),
            n_boot: DEFAULT_BOOTSTRAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sessions == 0 {
            return Err(Error::InvalidParams("sessions must be >= 1".into()));
        }
        self.observer.validate()
    }
}

/// Paths written by [`run_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub out_dir: PathBuf,
    pub fit: PathBuf,
    pub report: PathBuf,
    pub responses: PathBuf,
    pub charts: Vec<PathBuf>,
    pub overlays: Vec<PathBuf>,
}

/// Stage a failure came from, for diagnostics.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|source| StageError { stage: name, source })
}

/// Generate, simulate, fit, summarize and render into `out`.
///
/// ```text
/// out/manifest.json, out/stimuli/     stimulus pool
/// out/sessions/session-NNN.json       session plans
/// out/responses.ndjson                simulated formal responses
/// out/fit.json                        fit with Fieller intervals and Efficiency
/// out/report.json, out/figs/          per-cell summaries and charts
/// out/overlays/<id>.svg               predicted-mean overlays, one per cell
/// ```
pub fn run_pipeline(config: &PipelineConfig, out: &Path) -> std::result::Result<PipelineOutput, StageError> {
    stage("config", config.validate())?;
    stage("stimgen", fs::create_dir_all(out).map_err(Error::from))?;

    let pool = stage(
        "stimgen",
        StimulusPool::generate(derive_seed_path(config.seed, &[tag("pool")]), config.channel, config.pool),
    )?;
    stage("stimgen", write_pool(out, &pool))?;

    let mut responses = Vec::new();
    for i in 0..config.sessions {
        let plan = stage("session", plan_session(&pool, derive_seed_path(config.seed, &[tag("session"), i as u64])))?;
        stage("session", write_json(&out.join(SESSIONS_DIR).join(format!("session-{i:03}.json")), &plan))?;
        responses.extend(stage("simulate", simulate_experiment(&config.observer, &plan, &pool))?);
    }
    let responses_path = out.join(RESPONSES_FILE);
    stage("simulate", write_jsonl(&responses_path, &responses))?;

    let exclusions = SummaryOptions {
        n_boot: config.n_boot,
        seed: derive_seed_path(config.seed, &[tag("report")]),
        ..SummaryOptions::default()
    };
    let eff_options = EfficiencyOptions {
        repetitions: config.efficiency_repetitions,
        seed: derive_seed_path(config.seed, &[tag("efficiency")]),
    };
    let fit_file = stage(
        "fit",
        fit_file(&responses, pool.stimuli(), &exclusions, &config.fit, Some(&eff_options)),
    )?;
    let fit_path = out.join(FIT_FILE);
    stage("fit", write_json(&fit_path, &fit_file))?;

    let report = stage("report", summarize(&responses, pool.stimuli(), &exclusions))?;
    let report_path = out.join(REPORT_FILE);
    stage("report", write_json(&report_path, &report))?;
    let charts = stage("report", write_charts(&report, &out.join(FIGS_DIR)))?;

    let mut overlays = Vec::new();
    let cells = CellKey::test_cells().chain([CellKey::Control]);
    for cell in cells {
        let Some(id) = pool.cell_ids(cell).first().map(|s| s.to_string()) else { continue };
        let stimulus = pool.get(&id).expect("cell id resolves");
        let prediction = stage("predict", predict(&fit_file.model, stimulus))?;
        let svg = stage("predict", prediction_svg(stimulus, &prediction))?;
        let path = out.join(OVERLAYS_DIR).join(format!("{id}.svg"));
        stage("predict", fs::create_dir_all(out.join(OVERLAYS_DIR)).map_err(Error::from))?;
        stage("predict", fs::write(&path, svg).map_err(Error::from))?;
        overlays.push(path);
    }

    Ok(PipelineOutput {
        out_dir: out.to_path_buf(),
        fit: fit_path,
        report: report_path,
        responses: responses_path,
        charts,
        overlays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centroid::AttentionFilter;
    use crate::io::read_json;
    use crate::observer::WeightedObserverParams;
    use crate::stimgen::CorrelationLevel;

    fn small(observer: ObserverSpec) -> PipelineConfig {
        PipelineConfig {
            pool: PoolConfig { per_cell: 6, controls: 6, training_per_cell: 2 },
            sessions: 4,
            efficiency_repetitions: 20,
            n_boot: 1000,
            ..PipelineConfig::new(5, Channel::Size, observer)
        }
    }

    #[test]
    fn ideal_run_has_zero_bias() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_pipeline(&small(ObserverSpec::Weighted(WeightedObserverParams::ideal())), dir.path()).unwrap();
        let report: Report = read_json(&out.report).unwrap();
        for s in report.summaries.iter().filter(|s| s.measure == Measure::Bias) {
            assert!(s.ci_low <= 0.0 && 0.0 <= s.ci_high && s.mean.abs() < 1e-9, "{s:?}");
        }
        assert_eq!(out.charts.len(), 2);
        assert_eq!(out.overlays.len(), 10);
        let f: FitFile = read_json(&out.fit).unwrap();
        assert_eq!(f.weight_intervals.len(), 7);
        assert!(f.efficiency.unwrap().efficiency >= 0.9);
    }

    #[test]
    fn predict_examples() {
        let dir = tempfile::tempdir().unwrap();
        let params = WeightedObserverParams {
            filter: AttentionFilter::one_hot(6),
            noise_sd: 2.0,
            seed: 3,
            ..WeightedObserverParams::ideal()
        };
        let out = run_pipeline(&small(ObserverSpec::Weighted(params)), dir.path()).unwrap();
        let f: FitFile = read_json(&out.fit).unwrap();
        let pool = crate::io::read_pool(dir.path()).unwrap();
        let high = pool
            .stimuli()
            .iter()
            .find(|s| s.correlation.level == CorrelationLevel::High && !s.is_control)
            .unwrap();
        assert!(predict(&f.model, high).unwrap().gradient_projection.unwrap() > 0.0);
        let control = pool.stimuli().iter().find(|s| s.is_control).unwrap();
        let p = predict(&f.model, control).unwrap();
        assert!(p.displacement.magnitude < 1e-9 + (1.0 - f.data_drivenness).abs() * 500.0);
        let mut other = control.clone();
        other.encoding.channel = Channel::Lightness;
        assert!(matches!(predict(&f.model, &other), Err(Error::ChannelMismatch { .. })));
    }
}
