use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

use wai_core::centroid::{efficiency, EfficiencyOptions, FitOptions};
use wai_core::io::{read_json, read_jsonl, read_pool, read_stimuli, write_json, write_jsonl, write_pool};
use wai_core::measures::{apply_exclusions, join_trials, summarize, SummaryOptions};
use wai_core::observer::{
    simulate_experiment, DensityObserverParams, ObserverSpec, SubsamplerParams, WeightedObserverParams,
};
use wai_core::pipeline::{
    fit_file, predict, prediction_svg, run_pipeline, write_charts, FitFile, PipelineConfig,
};
use wai_core::render::emit_svg;
use wai_core::rng::{derive_seed_path, tag};
use wai_core::stimgen::{plan_session, PoolConfig, SessionPlan, StimulusPool};
use wai_core::{AttentionFilter, Point, StimulusSpec, TrialResponse};
use wai_service::{AppState, FileStore};

use crate::{
    Cli, Command, EfficiencyArgs, FitArgs, ObserverKind, PredictArgs, ReportArgs, RunArgs, ServeArgs,
    SimulateArgs, StimgenArgs,
};

pub fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let out = cli.out;
    match cli.command {
        Command::Stimgen(a) => stimgen(a, seed.unwrap_or(0), out),
        Command::Simulate(a) => simulate(a, seed, out),
        Command::Serve(a) => serve(a),
        Command::Fit(a) => fit(a, seed.unwrap_or(0), out),
        Command::Efficiency(a) => efficiency_cmd(a, seed.unwrap_or(0), out),
        Command::Predict(a) => predict_cmd(a, out),
        Command::Report(a) => report(a, seed.unwrap_or(0), out),
        Command::Run(a) => run(a, seed, out),
    }
}

fn load<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    read_json(path).with_context(|| format!("reading {what} {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn exclusions(keep_excluded: bool, n_boot: usize, seed: u64) -> SummaryOptions {
    SummaryOptions {
        n_boot,
        seed,
        exclude_duplicates: !keep_excluded,
        exclude_disengaged: !keep_excluded,
    }
}

fn stimgen(a: StimgenArgs, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let out = out.unwrap_or_else(|| PathBuf::from("out"));
    let config = PoolConfig {
        per_cell: a.pool.per_cell,
        controls: a.pool.controls,
        training_per_cell: a.pool.training_per_cell,
    };
    let pool = StimulusPool::generate(seed, a.channel.into(), config).context("stimgen")?;
    write_pool(&out, &pool).context("writing stimulus pool")?;
    for i in 0..a.sessions {
        let plan = plan_session(&pool, derive_seed_path(seed, &[tag("session"), i as u64])).context("planning session")?;
        write_json(&out.join("sessions").join(format!("session-{i:03}.json")), &plan)?;
    }
    eprintln!("wrote {} stimuli and {} session plan(s) to {}", pool.stimuli().len(), a.sessions, out.display());
    Ok(())
}

fn observer_spec(kind: ObserverKind, params: &Path) -> Result<ObserverSpec> {
    Ok(match kind {
        ObserverKind::Weighted => ObserverSpec::Weighted(load::<WeightedObserverParams>(params, "observer params")?),
        ObserverKind::Subsample => ObserverSpec::Subsample(load::<SubsamplerParams>(params, "observer params")?),
        ObserverKind::Density => ObserverSpec::Density(load::<DensityObserverParams>(params, "observer params")?),
    })
}

fn with_seed(spec: ObserverSpec, seed: u64) -> ObserverSpec {
    match spec {
        ObserverSpec::Weighted(p) => ObserverSpec::Weighted(WeightedObserverParams { seed, ..p }),
        ObserverSpec::Subsample(p) => ObserverSpec::Subsample(SubsamplerParams { seed, ..p }),
        ObserverSpec::Density(p) => ObserverSpec::Density(DensityObserverParams { seed, ..p }),
    }
}

fn simulate(a: SimulateArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let out = out.unwrap_or_else(|| PathBuf::from("responses.ndjson"));
    let mut spec = observer_spec(a.observer, &a.params)?;
    if let Some(seed) = seed {
        spec = with_seed(spec, seed);
    }
    let pool = read_pool(&a.stimuli).with_context(|| format!("reading stimulus pool {}", a.stimuli.display()))?;
    let mut paths = a.sessions.clone();
    if let Some(dir) = &a.sessions_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        found.sort();
        paths.extend(found);
    }
    if paths.is_empty() {
        bail!("simulate: no session plans given (use --session or --sessions-dir)");
    }
    let mut responses = Vec::new();
    for path in &paths {
        let plan: SessionPlan = load(path, "session plan")?;
        responses.extend(simulate_experiment(&spec, &plan, &pool).with_context(|| format!("simulating {}", path.display()))?);
    }
    write_jsonl(&out, &responses)?;
    eprintln!("wrote {} responses from {} session(s) to {}", responses.len(), paths.len(), out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let pool = read_pool(&a.stimuli).with_context(|| format!("reading stimulus pool {}", a.stimuli.display()))?;
    let store = FileStore::open(&a.log).with_context(|| format!("opening log {}", a.log.display()))?;
    let state = AppState::new(pool, store).context("replaying response log")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        wai_service::serve(listener, state, shutdown).await?;
        Ok(())
    })
}

fn read_inputs(responses: &Path, stimuli: &Path) -> Result<(Vec<TrialResponse>, Vec<StimulusSpec>)> {
    let r = read_jsonl(responses).with_context(|| format!("reading responses {}", responses.display()))?;
    let s = read_stimuli(stimuli).with_context(|| format!("reading stimuli {}", stimuli.display()))?;
    Ok((r, s))
}

fn fit(a: FitArgs, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let out = out.unwrap_or_else(|| PathBuf::from("fit.json"));
    let (responses, stimuli) = read_inputs(&a.responses, &a.stimuli)?;
    let options = FitOptions { max_iterations: a.max_iterations, tolerance: a.tolerance, ..FitOptions::default() };
    let eff = EfficiencyOptions { repetitions: a.reps, seed };
    let file = fit_file(
        &responses,
        &stimuli,
        &exclusions(a.keep_excluded, wai_core::measures::DEFAULT_BOOTSTRAP, seed),
        &options,
        (!a.no_efficiency).then_some(&eff),
    )
    .context("fit")?;
    write_json(&out, &file)?;
    eprintln!(
        "fit {} trials: V = {:.4}, sigma_hat = {:.3}px, converged = {}",
        file.model.n_trials, file.data_drivenness, file.sigma_hat, file.model.converged
    );
    if let Some(e) = &file.efficiency {
        eprintln!("efficiency: {e}");
    }
    Ok(())
}

fn efficiency_cmd(a: EfficiencyArgs, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let file: FitFile = load(&a.fit, "fit")?;
    let (responses, stimuli) = read_inputs(&a.responses, &a.stimuli)?;
    let (kept, _) = apply_exclusions(&responses, &exclusions(a.keep_excluded, wai_core::measures::DEFAULT_BOOTSTRAP, seed));
    let trials = join_trials(&kept, &stimuli).context("efficiency")?;
    let result = efficiency(&file.model, &trials, &EfficiencyOptions { repetitions: a.reps, seed }).context("efficiency")?;
    eprintln!("efficiency: {result}");
    match out {
        Some(path) => write_json(&path, &result)?,
        None => print_json(&result)?,
    }
    Ok(())
}

fn predict_cmd(a: PredictArgs, out: Option<PathBuf>) -> Result<()> {
    let file: FitFile = load(&a.fit, "fit")?;
    let stimulus: StimulusSpec = load(&a.stimulus, "stimulus")?;
    let prediction = predict(&file.model, &stimulus).context("predict")?;
    if let Some(svg) = &a.svg {
        write_text(svg, &prediction_svg(&stimulus, &prediction)?)?;
    }
    match out {
        Some(path) => write_json(&path, &prediction)?,
        None => print_json(&prediction)?,
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn report(a: ReportArgs, seed: u64, out: Option<PathBuf>) -> Result<()> {
    if let Some(stimulus) = &a.stimulus {
        let s: StimulusSpec = load(stimulus, "stimulus")?;
        let svg = emit_svg(&s).context("render")?;
        match a.svg.as_ref().or(out.as_ref()) {
            Some(path) => write_text(path, &svg)?,
            None => print!("{svg}"),
        }
        return Ok(());
    }
    let (Some(responses), Some(stimuli)) = (&a.responses, &a.stimuli) else {
        bail!("report: --responses and --stimuli are required");
    };
    let out = out.unwrap_or_else(|| PathBuf::from("report.json"));
    let (responses, stimuli) = read_inputs(responses, stimuli)?;
    let report = summarize(&responses, &stimuli, &exclusions(a.keep_excluded, a.n_boot, seed)).context("report")?;
    write_json(&out, &report)?;
    if let Some(dir) = &a.svg {
        let charts = write_charts(&report, dir)?;
        eprintln!("wrote {} chart(s) to {}", charts.len(), dir.display());
    }
    for s in &report.summaries {
        let cell = match (s.range_class, s.correlation) {
            (Some(r), Some(c)) => format!("{c}-{r}"),
            _ => "control".to_string(),
        };
        eprintln!("{:?} {} {cell}: {s} (n={})", s.measure, s.channel, s.n);
    }
    Ok(())
}

/// Salience-biased weighted observer used when `run` gets no parameters.
fn default_observer(kind: ObserverKind) -> ObserverSpec {
    match kind {
        ObserverKind::Weighted => ObserverSpec::Weighted(WeightedObserverParams {
            filter: AttentionFilter::salience(1.0),
            data_drivenness: 0.85,
            default_point: Point::new(250.0, 250.0),
            noise_sd: 10.0,
            seed: 0,
        }),
        ObserverKind::Subsample => {
            ObserverSpec::Subsample(SubsamplerParams { k: 6, salience_exponent: 1.0, noise_sd: 5.0, seed: 0 })
        }
        ObserverKind::Density => ObserverSpec::Density(DensityObserverParams {
            split_level: 4,
            illusion_factor: 1.5,
            noise_sd: 5.0,
            seed: 0,
        }),
    }
}

fn run(a: RunArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let out = out.unwrap_or_else(|| PathBuf::from("out"));
    let mut config = match &a.config {
        Some(path) => load::<PipelineConfig>(path, "pipeline config")?,
        None => {
            let observer = match &a.params {
                Some(p) => observer_spec(a.observer, p)?,
                None => default_observer(a.observer),
            };
            PipelineConfig {
                sessions: a.sessions,
                efficiency_repetitions: a.reps,
                n_boot: a.n_boot,
                ..PipelineConfig::new(0, a.channel.into(), observer)
            }
        }
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let output = run_pipeline(&config, &out)?;
    let file: FitFile = load(&output.fit, "fit")?;
    eprintln!(
        "run complete in {}: V = {:.4}, sigma_hat = {:.3}px{}",
        out.display(),
        file.data_drivenness,
        file.sigma_hat,
        file.efficiency.map(|e| format!(", efficiency {e}")).unwrap_or_default()
    );
    Ok(())
}
