use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, Direction, Point, N_LEVELS};

use super::correlation::{CorrelationCondition, CorrelationLevel};
use super::encoding::{encoding_levels, Channel, EncodingRange, RangeClass};
use super::poisson::PointGrid;

pub const SCHEMA_VERSION: u32 = 1;
/// Level every control mark carries (the shared range midpoint).
pub const CONTROL_LEVEL: u8 = 3;

/// One scatterplot: positions, per-mark level, encoding and correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StimulusFile", into = "StimulusFile")]
pub struct StimulusSpec {
    pub id: String,
    pub grid: PointGrid,
    /// τ for every mark, 0 (least salient) to 6 (largest/darkest).
    pub level_of: Vec<u8>,
    pub encoding: EncodingRange,
    pub correlation: CorrelationCondition,
    pub true_mean: Point,
    pub is_control: bool,
}

impl StimulusSpec {
    pub fn points(&self) -> &[Point] {
        &self.grid.points
    }

    pub fn channel(&self) -> Channel {
        self.encoding.channel
    }

    /// Unit vector of the gradient (toward larger/darker marks).
    pub fn gradient(&self) -> [f64; 2] {
        self.correlation.direction.unit_vector()
    }

    /// Iterator over `(point, level)`.
    pub fn marks(&self) -> impl Iterator<Item = (Point, u8)> + '_ {
        self.grid.points.iter().copied().zip(self.level_of.iter().copied())
    }

    /// Same stimulus shifted by `(dx, dy)`; bounds are not re-checked.
    pub fn translated(&self, dx: f64, dy: f64) -> StimulusSpec {
        let mut s = self.clone();
        for p in &mut s.grid.points {
            *p = p.translate(dx, dy);
        }
        s.true_mean = s.true_mean.translate(dx, dy);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.points.len();
        if n == 0 {
            return Err(Error::InvalidStimulus(format!("{}: no points", self.id)));
        }
        if self.level_of.len() != n {
            return Err(Error::InvalidStimulus(format!(
                "{}: {} levels for {} points",
                self.id,
                self.level_of.len(),
                n
            )));
        }
        if let Some(bad) = self.level_of.iter().find(|&&l| l as usize >= N_LEVELS) {
            return Err(Error::InvalidStimulus(format!(
                "{}: level {} out of range",
                self.id, bad
            )));
        }
        if self.grid.points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidStimulus(format!("{}: non-finite point", self.id)));
        }
        if self.is_control {
            if self.level_of.iter().any(|&l| l != CONTROL_LEVEL) {
                return Err(Error::InvalidStimulus(format!(
                    "{}: control marks must all be level {CONTROL_LEVEL}",
                    self.id
                )));
            }
        } else if n >= N_LEVELS {
            for lvl in 0..N_LEVELS as u8 {
                if !self.level_of.contains(&lvl) {
                    return Err(Error::InvalidStimulus(format!(
                        "{}: level {lvl} missing",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn build_stimulus(
    id: impl Into<String>,
    grid: PointGrid,
    levels: Vec<u8>,
    encoding: EncodingRange,
    condition: CorrelationCondition,
) -> Result<StimulusSpec> {
    let true_mean = centroid(&grid.points)
        .ok_or_else(|| Error::InvalidStimulus("empty grid".into()))?;
    let spec = StimulusSpec {
        id: id.into(),
        grid,
        level_of: levels,
        encoding,
        correlation: condition,
        true_mean,
        is_control: false,
    };
    spec.validate()?;
    Ok(spec)
}

/// Control stimulus: every mark at the shared midpoint, no correlation.
pub fn build_control(id: impl Into<String>, grid: PointGrid, channel: Channel) -> Result<StimulusSpec> {
    let true_mean = centroid(&grid.points)
        .ok_or_else(|| Error::InvalidStimulus("empty grid".into()))?;
    let n = grid.points.len();
    let spec = StimulusSpec {
        id: id.into(),
        grid,
        level_of: vec![CONTROL_LEVEL; n],
        encoding: encoding_levels(channel, RangeClass::Medium),
        correlation: CorrelationCondition::new(CorrelationLevel::None, Direction::NE),
        true_mean,
        is_control: true,
    };
    spec.validate()?;
    Ok(spec)
}

/// On-disk stimulus record (schema version 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StimulusFile {
    pub schema_version: u32,
    pub id: String,
    pub points: Vec<Point>,
    pub levels: Vec<u8>,
    pub channel: Channel,
    pub range_class: RangeClass,
    pub rho_target: f64,
    pub direction: Direction,
    pub true_mean: Point,
    pub is_control: bool,
    /// Seed of the position grid.
    #[serde(default)]
    pub grid_seed: u64,
}

impl From<StimulusSpec> for StimulusFile {
    fn from(s: StimulusSpec) -> Self {
        StimulusFile {
            schema_version: SCHEMA_VERSION,
            id: s.id,
            points: s.grid.points,
            levels: s.level_of,
            channel: s.encoding.channel,
            range_class: s.encoding.range_class,
            rho_target: s.correlation.target_rho(),
            direction: s.correlation.direction,
            true_mean: s.true_mean,
            is_control: s.is_control,
            grid_seed: s.grid.seed,
        }
    }
}

impl TryFrom<StimulusFile> for StimulusSpec {
    type Error = Error;

    fn try_from(f: StimulusFile) -> Result<Self> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidStimulus(format!(
                "{}: unsupported schema version {}",
                f.id, f.schema_version
            )));
        }
        let level = CorrelationLevel::from_target(f.rho_target).ok_or_else(|| {
            Error::InvalidStimulus(format!("{}: unknown rho_target {}", f.id, f.rho_target))
        })?;
        let spec = StimulusSpec {
            id: f.id,
            grid: PointGrid {
                points: f.points,
                seed: f.grid_seed,
                region_px: crate::geometry::REGION_PX,
            },
            level_of: f.levels,
            encoding: encoding_levels(f.channel, f.range_class),
            correlation: CorrelationCondition::new(level, f.direction),
            true_mean: f.true_mean,
            is_control: f.is_control,
        };
        spec.validate()?;
        Ok(spec)
    }
}
