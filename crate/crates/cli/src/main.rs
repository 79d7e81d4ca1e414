//! `wai`: stimulus generation, simulation, serving, fitting and reporting.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "wai", version, about = "Weighted-average illusion toolkit")]
struct Cli {
    /// Master seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory (meaning depends on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a stimulus pool and session plans.
    Stimgen(StimgenArgs),
    /// Simulate an observer over one or more session plans.
    Simulate(SimulateArgs),
    /// Run the experiment HTTP service.
    Serve(ServeArgs),
    /// Fit the centroid model to responses.
    Fit(FitArgs),
    /// Estimate Efficiency for an existing fit.
    Efficiency(EfficiencyArgs),
    /// Predict the perceived mean of a stimulus under a fit.
    Predict(PredictArgs),
    /// Summarize responses per condition, or render one stimulus.
    Report(ReportArgs),
    /// Generate, simulate, fit and report in one go.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChannelArg {
    Size,
    Lightness,
}

impl From<ChannelArg> for wai_core::Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Size => wai_core::Channel::Size,
            ChannelArg::Lightness => wai_core::Channel::Lightness,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObserverKind {
    Weighted,
    Subsample,
    Density,
}

#[derive(Args, Debug)]
struct PoolArgs {
    /// Test stimuli per range x correlation cell.
    #[arg(long, default_value_t = 12)]
    per_cell: usize,
    #[arg(long, default_value_t = 12)]
    controls: usize,
    #[arg(long, default_value_t = 2)]
    training_per_cell: usize,
}

#[derive(Args, Debug)]
struct StimgenArgs {
    #[arg(long, value_enum)]
    channel: ChannelArg,
    #[command(flatten)]
    pool: PoolArgs,
    /// Session plans to write under sessions/.
    #[arg(long, default_value_t = 1)]
    sessions: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    observer: ObserverKind,
    /// JSON file with the observer parameters.
    #[arg(long)]
    params: PathBuf,
    /// Session plan file; repeatable.
    #[arg(long = "session")]
    sessions: Vec<PathBuf>,
    /// Directory of session plan files.
    #[arg(long = "sessions-dir")]
    sessions_dir: Option<PathBuf>,
    #[arg(long)]
    stimuli: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    stimuli: PathBuf,
    /// NDJSON response log (created if missing, replayed if present).
    #[arg(long)]
    log: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    stimuli: PathBuf,
    /// Deletion repetitions for the Efficiency block.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Skip the Efficiency block.
    #[arg(long)]
    no_efficiency: bool,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Fit every formal response, ignoring exclusion flags.
    #[arg(long)]
    keep_excluded: bool,
}

#[derive(Args, Debug)]
struct EfficiencyArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    stimuli: PathBuf,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Fit every formal response, ignoring exclusion flags.
    #[arg(long)]
    keep_excluded: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    stimulus: PathBuf,
    /// Write an SVG with the predicted mean overlaid.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, required_unless_present = "stimulus")]
    responses: Option<PathBuf>,
    #[arg(long, requires = "responses")]
    stimuli: Option<PathBuf>,
    /// Render this stimulus file instead of summarizing responses.
    #[arg(long, conflicts_with_all = ["responses", "stimuli"])]
    stimulus: Option<PathBuf>,
    /// Chart directory, or the SVG file when rendering a stimulus.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = wai_core::measures::DEFAULT_BOOTSTRAP)]
    n_boot: usize,
    #[arg(long)]
    keep_excluded: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Pipeline config JSON; flags below are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "size")]
    channel: ChannelArg,
    #[arg(long, value_enum, default_value = "weighted")]
    observer: ObserverKind,
    /// Observer parameters JSON (default: a salience-biased weighted observer).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    sessions: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = wai_core::measures::DEFAULT_BOOTSTRAP)]
    n_boot: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
