//! Stimulus synthesis: point grids, correlated level assignments, encoding
//! ranges, stimulus pools and session plans.

mod correlation;
mod encoding;
mod poisson;
mod pool;
mod session;
mod stimulus;

pub use correlation::{
    assign_levels, balanced_level_counts, oriented_correlations, pearson, CorrelationCondition,
    CorrelationLevel, RHO_TOLERANCE,
};
pub use encoding::{encoding_levels, Channel, EncodingRange, RangeClass};
pub use poisson::{generate_point_grid, PointGrid, MAX_RESTARTS};
pub use pool::{grid_xy_correlation, CellKey, PoolConfig, StimulusPool, HIGH_GRID_MIN_XY_CORR};
pub use session::{
    plan_session, EngagementCheck, SessionPlan, Slot, ENGAGEMENT_CHECKS, FORMAL_PER_CELL,
    FORMAL_CONTROLS, TRAINING_TRIALS,
};
pub use stimulus::{build_control, build_stimulus, StimulusFile, StimulusSpec, SCHEMA_VERSION};
