use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, REGION_PX, INSET};
use crate::rng::{derive_seed, rng_from_seed, StreamRng};

use super::encoding::Channel;
use super::pool::{CellKey, StimulusPool};

pub const TRAINING_TRIALS: usize = 18;
pub const FORMAL_PER_CELL: usize = 6;
pub const FORMAL_CONTROLS: usize = 6;
pub const FORMAL_TRIALS: usize = 9 * FORMAL_PER_CELL + FORMAL_CONTROLS;
pub const ENGAGEMENT_CHECKS: usize = 4;
/// Engagement points stay this far from both midlines.
const ENGAGEMENT_MIDLINE_CLEARANCE: f64 = 50.0;

/// Single-point attention check shown before formal trial `position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementCheck {
    pub position: usize,
    pub point: Point,
}

impl EngagementCheck {
    /// Quadrant index 0..4 as (east, north) bits; `None` on a midline.
    pub fn quadrant_of(p: Point) -> Option<(bool, bool)> {
        let mid = REGION_PX / 2.0;
        if p.x == mid || p.y == mid {
            return None;
        }
        Some((p.x > mid, p.y > mid))
    }

    pub fn passes(&self, click: Point) -> bool {
        match (Self::quadrant_of(self.point), Self::quadrant_of(click)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub schema_version: u32,
    pub seed: u64,
    pub channel: Channel,
    pub training: Vec<String>,
    pub formal: Vec<String>,
    pub engagement_positions: Vec<usize>,
    pub engagement: Vec<EngagementCheck>,
}

/// One presentation in session order.
#[derive(Debug, Clone, PartialEq)]
pub enum Slot<'a> {
    Training { index: usize, stimulus_id: &'a str },
    Formal { index: usize, stimulus_id: &'a str },
    Engagement { index: usize, check: EngagementCheck },
}

impl SessionPlan {
    /// Training trials, then the formal sequence with the engagement checks
    /// inserted before their formal positions.
    pub fn slots(&self) -> Vec<Slot<'_>> {
        let mut out = Vec::with_capacity(self.training.len() + self.formal.len() + self.engagement.len());
        for (index, id) in self.training.iter().enumerate() {
            out.push(Slot::Training { index, stimulus_id: id });
        }
        let mut checks = self.engagement.iter().enumerate().peekable();
        for (index, id) in self.formal.iter().enumerate() {
            while let Some((k, check)) = checks.peek() {
                if check.position == index {
                    out.push(Slot::Engagement { index: *k, check: **check });
                    checks.next();
                } else {
                    break;
                }
            }
            out.push(Slot::Formal { index, stimulus_id: id });
        }
        for (k, check) in checks {
            out.push(Slot::Engagement { index: k, check: *check });
        }
        out
    }

    pub fn total_slots(&self) -> usize {
        self.training.len() + self.formal.len() + self.engagement.len()
    }
}

fn engagement_schedule(rng: &mut StreamRng, n_formal: usize) -> Vec<usize> {
    loop {
        let mut positions = Vec::with_capacity(ENGAGEMENT_CHECKS);
        let mut pos = rng.random_range(5..=10usize);
        positions.push(pos);
        for _ in 1..ENGAGEMENT_CHECKS {
            pos += (15 + rng.random_range(-3i64..=3)) as usize;
            positions.push(pos);
        }
        if pos < n_formal {
            return positions;
        }
    }
}

fn engagement_point(rng: &mut StreamRng) -> Point {
    let mid = REGION_PX / 2.0;
    let near = INSET..=(mid - ENGAGEMENT_MIDLINE_CLEARANCE);
    let far = (mid + ENGAGEMENT_MIDLINE_CLEARANCE)..=(REGION_PX - INSET);
    let x = if rng.random_bool(0.5) { rng.random_range(far.clone()) } else { rng.random_range(near.clone()) };
    let y = if rng.random_bool(0.5) { rng.random_range(far) } else { rng.random_range(near) };
    Point::new(x, y)
}

/// Seeded session: 18 training trials, 60 formal trials (six per
/// range x correlation cell plus six controls) in random order, and four
/// engagement checks.
pub fn plan_session(pool: &StimulusPool, seed: u64) -> Result<SessionPlan> {
    let mut rng = rng_from_seed(derive_seed(seed, 0x5E55));

    let training_pool = pool.training_ids();
    if training_pool.len() < TRAINING_TRIALS {
        return Err(Error::InsufficientPool {
            cell: "training".into(),
            needed: TRAINING_TRIALS,
            available: training_pool.len(),
        });
    }
    let mut training: Vec<String> = training_pool
        .choose_multiple(&mut rng, TRAINING_TRIALS)
        .cloned()
        .collect();
    training.shuffle(&mut rng);

    let mut formal = Vec::with_capacity(FORMAL_TRIALS);
    let cells = CellKey::test_cells()
        .map(|c| (c, FORMAL_PER_CELL))
        .chain(std::iter::once((CellKey::Control, FORMAL_CONTROLS)));
    for (cell, needed) in cells {
        let ids = pool.cell_ids(cell);
        if ids.len() < needed {
            return Err(Error::InsufficientPool {
                cell: cell.to_string(),
                needed,
                available: ids.len(),
            });
        }
        formal.extend(ids.choose_multiple(&mut rng, needed).map(|s| s.to_string()));
    }
    formal.shuffle(&mut rng);

    let engagement_positions = engagement_schedule(&mut rng, formal.len());
    let engagement = engagement_positions
        .iter()
        .map(|&position| EngagementCheck {
            position,
            point: engagement_point(&mut rng),
        })
        .collect();

    Ok(SessionPlan {
        schema_version: super::SCHEMA_VERSION,
        seed,
        channel: pool.channel,
        training,
        formal,
        engagement_positions,
        engagement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimgen::PoolConfig;
    use std::collections::BTreeMap;
    use std::sync::OnceLock;

    fn pool() -> &'static StimulusPool {
        static POOL: OnceLock<StimulusPool> = OnceLock::new();
        POOL.get_or_init(|| {
            let cfg = PoolConfig { per_cell: 7, controls: 7, training_per_cell: 2 };
            StimulusPool::generate(21, Channel::Lightness, cfg).unwrap()
        })
    }

    #[test]
    fn cell_counts() {
        let plan = plan_session(pool(), 1).unwrap();
        assert_eq!(plan.formal.len(), 60);
        assert_eq!(plan.training.len(), 18);
        let mut counts: BTreeMap<CellKey, usize> = BTreeMap::new();
        for id in &plan.formal {
            *counts.entry(CellKey::of(pool().get(id).unwrap())).or_default() += 1;
        }
        assert_eq!(counts[&CellKey::Control], 6);
        for cell in CellKey::test_cells() {
            assert_eq!(counts[&cell], 6, "{cell}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(plan_session(pool(), 1).unwrap(), plan_session(pool(), 1).unwrap());
        assert_ne!(plan_session(pool(), 1).unwrap(), plan_session(pool(), 3).unwrap());
    }

    #[test]
    fn engagement_gaps() {
        for seed in [2, 4, 8, 16, 32] {
            let plan = plan_session(pool(), seed).unwrap();
            let p = &plan.engagement_positions;
            assert_eq!(p.len(), 4);
            assert!((5..=10).contains(&p[0]));
            for w in p.windows(2) {
                assert!((12..=18).contains(&(w[1] - w[0])), "{p:?}");
            }
            assert!(*p.last().unwrap() < 60);
            for c in &plan.engagement {
                assert!((c.point.x - 250.0).abs() >= 50.0 && (c.point.y - 250.0).abs() >= 50.0);
            }
        }
    }

    #[test]
    fn slots_interleave_checks() {
        let plan = plan_session(pool(), 5).unwrap();
        let slots = plan.slots();
        assert_eq!(slots.len(), 18 + 60 + 4);
        let first_check = slots
            .iter()
            .position(|s| matches!(s, Slot::Engagement { .. }))
            .unwrap();
        assert_eq!(first_check, 18 + plan.engagement_positions[0]);
    }

    #[test]
    fn insufficient_pool() {
        let cfg = PoolConfig { per_cell: 2, controls: 6, training_per_cell: 2 };
        let small = StimulusPool::generate(3, Channel::Size, cfg).unwrap();
        assert!(matches!(plan_session(&small, 1), Err(Error::InsufficientPool { .. })));
    }

    #[test]
    fn quadrant_check() {
        let c = EngagementCheck { position: 5, point: Point::new(400.0, 400.0) };
        assert!(c.passes(Point::new(300.0, 260.0)));
        assert!(!c.passes(Point::new(100.0, 400.0)));
    }
}
