use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{Direction, MIN_CENTER_DIST, N_MARKS, REGION_PX};
use crate::rng::{derive_seed, derive_seed_path};

use super::correlation::{assign_levels, pearson, CorrelationCondition, CorrelationLevel};
use super::encoding::{encoding_levels, Channel, RangeClass};
use super::poisson::{generate_point_grid, PointGrid};
use super::stimulus::{build_control, build_stimulus, StimulusSpec};

/// Minimum |corr(x, y)| of a grid used for High stimuli.
///
/// With uncorrelated x and y the level can correlate with both axes by at
/// most sqrt(1/2); reaching rho_x = rho_y = rho needs corr(x, y) >= 2 rho^2 - 1
/// (positive semi-definiteness of the 3x3 correlation matrix), i.e. >= 0.125
/// at the 0.75 lower band edge. With only seven discrete levels the binned
/// assignment loses a little more, so grids are screened at 0.3.
pub const HIGH_GRID_MIN_XY_CORR: f64 = 0.3;
const MAX_GRID_DRAWS: usize = 5_000;
const MAX_STIMULUS_ATTEMPTS: usize = 50;

pub fn grid_xy_correlation(grid: &PointGrid) -> Result<f64> {
    let xs: Vec<f64> = grid.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = grid.points.iter().map(|p| p.y).collect();
    pearson(&xs, &ys)
}

/// A 30-point grid able to carry `condition`. High stimuli draw grids until
/// one has enough x/y correlation, mirrored when its sign disagrees with
/// the gradient diagonal.
pub(crate) fn grid_for_condition(seed: u64, condition: CorrelationCondition) -> Result<PointGrid> {
    if condition.level != CorrelationLevel::High {
        return generate_point_grid(seed, N_MARKS, REGION_PX, MIN_CENTER_DIST);
    }
    let (sx, sy) = condition.direction.signs();
    for draw in 0..MAX_GRID_DRAWS {
        let grid = generate_point_grid(derive_seed(seed, draw as u64), N_MARKS, REGION_PX, MIN_CENTER_DIST)?;
        let r = grid_xy_correlation(&grid)?;
        if r.abs() >= HIGH_GRID_MIN_XY_CORR {
            return Ok(if r * sx * sy < 0.0 { grid.mirrored_x() } else { grid });
        }
    }
    Err(Error::CorrelationExhausted {
        target: condition.target_rho(),
        tolerance: condition.tolerance(),
        attempts: MAX_GRID_DRAWS,
    })
}

fn make_stimulus(
    id: String,
    seed: u64,
    channel: Channel,
    range: RangeClass,
    condition: CorrelationCondition,
) -> Result<StimulusSpec> {
    let mut last_err = None;
    for attempt in 0..MAX_STIMULUS_ATTEMPTS as u64 {
        let grid = grid_for_condition(derive_seed_path(seed, &[attempt, 0]), condition)?;
        match assign_levels(&grid, condition, derive_seed_path(seed, &[attempt, 1])) {
            Ok(levels) => {
                return build_stimulus(id, grid, levels, encoding_levels(channel, range), condition)
            }
            Err(e @ Error::CorrelationExhausted { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Condition cell of the formal design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellKey {
    Test(RangeClass, CorrelationLevel),
    Control,
}

impl CellKey {
    pub fn test_cells() -> impl Iterator<Item = CellKey> {
        RangeClass::ALL.into_iter().flat_map(|r| {
            CorrelationLevel::ALL
                .into_iter()
                .map(move |c| CellKey::Test(r, c))
        })
    }

    pub fn of(stimulus: &StimulusSpec) -> CellKey {
        if stimulus.is_control {
            CellKey::Control
        } else {
            CellKey::Test(stimulus.encoding.range_class, stimulus.correlation.level)
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellKey::Test(r, c) => write!(f, "{c}-{r}"),
            CellKey::Control => f.write_str("control"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    /// Formal-pool stimuli per (range, correlation) cell.
    pub per_cell: usize,
    pub controls: usize,
    /// Training stimuli per cell (two per cell gives the 18 training trials).
    pub training_per_cell: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            per_cell: 12,
            controls: 12,
            training_per_cell: 2,
        }
    }
}

/// Pre-generated stimuli for one channel.
#[derive(Debug, Clone)]
pub struct StimulusPool {
    pub seed: u64,
    pub channel: Channel,
    pub config: PoolConfig,
    stimuli: Vec<StimulusSpec>,
    training: Vec<String>,
    index: BTreeMap<String, usize>,
}

enum Job {
    Test { cell: usize, i: usize, range: RangeClass, level: CorrelationLevel, training: bool },
    Control { i: usize },
}

impl StimulusPool {
    pub fn generate(seed: u64, channel: Channel, config: PoolConfig) -> Result<Self> {
        let mut jobs = Vec::new();
        for (cell, key) in CellKey::test_cells().enumerate() {
            let CellKey::Test(range, level) = key else { unreachable!() };
            for i in 0..config.per_cell {
                jobs.push(Job::Test { cell, i, range, level, training: false });
            }
            for i in 0..config.training_per_cell {
                jobs.push(Job::Test { cell, i, range, level, training: true });
            }
        }
        for i in 0..config.controls {
            jobs.push(Job::Control { i });
        }

        let ch = channel as u64;
        let built: Vec<Result<(StimulusSpec, bool)>> = jobs
            .par_iter()
            .map(|job| match *job {
                Job::Test { cell, i, range, level, training } => {
                    let direction = Direction::ALL[i % 4];
                    let prefix = if training { "train-" } else { "" };
                    let id = format!("{channel}-{prefix}{level}-{range}-{i:03}");
                    let s = derive_seed_path(seed, &[ch, cell as u64, training as u64, i as u64]);
                    let cond = CorrelationCondition::new(level, direction);
                    make_stimulus(id, s, channel, range, cond).map(|st| (st, training))
                }
                Job::Control { i } => {
                    let s = derive_seed_path(seed, &[ch, 99, 0, i as u64]);
                    let grid = generate_point_grid(s, N_MARKS, REGION_PX, MIN_CENTER_DIST)?;
                    build_control(format!("{channel}-control-{i:03}"), grid, channel)
                        .map(|st| (st, false))
                }
            })
            .collect();

        let mut stimuli = Vec::with_capacity(built.len());
        let mut training = Vec::new();
        for item in built {
            let (st, is_training) = item?;
            if is_training {
                training.push(st.id.clone());
            }
            stimuli.push(st);
        }
        Self::from_parts(seed, channel, config, stimuli, training)
    }

    pub fn from_parts(
        seed: u64,
        channel: Channel,
        config: PoolConfig,
        stimuli: Vec<StimulusSpec>,
        training: Vec<String>,
    ) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, s) in stimuli.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::InvalidStimulus(format!("duplicate id {}", s.id)));
            }
        }
        for id in &training {
            if !index.contains_key(id) {
                return Err(Error::UnknownStimulus(id.clone()));
            }
        }
        Ok(Self {
            seed,
            channel,
            config,
            stimuli,
            training,
            index,
        })
    }

    pub fn get(&self, id: &str) -> Option<&StimulusSpec> {
        self.index.get(id).map(|&i| &self.stimuli[i])
    }

    pub fn stimuli(&self) -> &[StimulusSpec] {
        &self.stimuli
    }

    pub fn training_ids(&self) -> &[String] {
        &self.training
    }

    pub fn is_training(&self, id: &str) -> bool {
        self.training.iter().any(|t| t == id)
    }

    /// Formal-pool ids in `cell`, in generation order.
    pub fn cell_ids(&self, cell: CellKey) -> Vec<&str> {
        self.stimuli
            .iter()
            .filter(|s| CellKey::of(s) == cell && !self.is_training(&s.id))
            .map(|s| s.id.as_str())
            .collect()
    }
}
