use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot pack {n_points} points at distance {min_dist}px after {restarts} restarts")]
    InfeasiblePacking {
        n_points: usize,
        min_dist: f64,
        restarts: usize,
    },
    #[error("degenerate variance: correlation undefined for a constant sequence")]
    DegenerateVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("level assignment did not reach rho={target}±{tolerance} after {attempts} attempts")]
    CorrelationExhausted {
        target: f64,
        tolerance: f64,
        attempts: usize,
    },
    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),
    #[error("insufficient stimulus pool for {cell}: need {needed}, have {available}")]
    InsufficientPool {
        cell: String,
        needed: usize,
        available: usize,
    },
    #[error("lightness {0} outside [0, 100]")]
    LightnessOutOfRange(f64),
    #[error("attention filter weights of the marks present sum to zero")]
    ZeroDenominator,
    #[error("underdetermined fit: {observations} observations for {parameters} parameters")]
    Underdetermined {
        observations: usize,
        parameters: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degrees of freedom must be >= 1, got {0}")]
    InvalidDf(i64),
    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("unknown stimulus id {0}")]
    UnknownStimulus(String),
    #[error("{} responses reference unknown stimuli: {}", .0.len(), .0.join(", "))]
    OrphanResponses(Vec<String>),
    #[error("channel mismatch: fit is {fit}, stimulus is {stimulus}")]
    ChannelMismatch { fit: String, stimulus: String },
    #[error("singular linear system")]
    Singular,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
