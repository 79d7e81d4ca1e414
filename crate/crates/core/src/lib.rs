//! Stimulus synthesis, synthetic observers and centroid-method fitting for
//! studies of perceived mean position in trivariate scatterplots.
//!
//! The pipeline runs in stages that exchange flat files:
//!
//! * [`stimgen`] builds Poisson-disk point grids, correlates mark size or
//!   lightness with position, and plans participant sessions.
//! * [`observer`] simulates click responses under three strategies
//!   (feature-weighted averaging, salience-biased subsampling, and
//!   density-segment weighting).
//! * [`centroid`] fits the attention filter, Data-Drivenness and default
//!   location to responses, with Fieller intervals and the Efficiency
//!   estimate.
//! * [`measures`] reduces responses to error magnitudes and gradient bias
//!   with bootstrap intervals.
//! * [`colorimetry`], [`render`] and [`chart`] emit SVG output.

pub mod centroid;
pub mod chart;
pub mod colorimetry;
pub mod error;
pub mod geometry;
pub mod io;
pub mod measures;
pub mod observer;
pub mod pipeline;
pub mod render;
pub mod response;
pub mod rng;
pub mod stimgen;

pub use centroid::{
    equal_weight_baseline, fit, predict_response, weighted_mean, AttentionFilter, CentroidFit,
    EfficiencyResult, FitOptions, WeightInterval,
};
pub use error::{Error, Result};
pub use geometry::{Direction, Point};
pub use response::TrialResponse;
pub use stimgen::{
    Channel, CorrelationCondition, CorrelationLevel, EncodingRange, PointGrid, RangeClass,
    SessionPlan, StimulusPool, StimulusSpec,
};
