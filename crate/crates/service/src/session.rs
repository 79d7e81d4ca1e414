use serde::{Deserialize, Serialize};

use wai_core::colorimetry::lightness_to_srgb;
use wai_core::geometry::{Point, REGION_PX};
use wai_core::render::{mark_style, LIGHTNESS_MARK_DIAMETER, SIZE_MARK_LIGHTNESS, TICK_SPACING};
use wai_core::response::TrialResponse;
use wai_core::stimgen::{Channel, EngagementCheck, SessionPlan, Slot, StimulusPool};

use crate::store::{SessionRecord, StoreError};

/// Failed engagement checks at which a session is flagged excluded.
pub const ENGAGEMENT_FAIL_LIMIT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Tutorial,
    Training,
    Formal,
    Done,
}

/// Presentation timing; the client enforces it, the server audits `rt_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub mask_ms: u32,
    pub fixation_ms: u32,
    pub response_window_ms: u32,
}

pub const TIMING: Timing = Timing { mask_ms: 500, fixation_ms: 500, response_window_ms: 5000 };

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session is complete")]
    Done,
    #[error("expected trial {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("click ({x}, {y}) outside the 500x500 stimulus")]
    OutOfBounds { x: f64, y: f64 },
    #[error("rt_ms must be finite and >= 0, got {0}")]
    InvalidRt(f64),
    #[error("stimulus {0} missing from the pool")]
    UnknownStimulus(String),
    #[error("session plan error: {0}")]
    Plan(#[from] wai_core::Error),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialKind {
    Stimulus,
    Engagement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkPayload {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub fill: String,
}

/// What the client draws. Coordinates are data space (y up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusPayload {
    pub id: String,
    pub channel: Channel,
    pub region_px: f64,
    pub tick_spacing: f64,
    pub marks: Vec<MarkPayload>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// 1-based position within the current block.
    pub index: usize,
    pub of: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDescriptor {
    pub session_id: String,
    pub trial_index: usize,
    pub phase: Phase,
    pub kind: TrialKind,
    pub progress: Progress,
    pub timing: Timing,
    pub feedback: bool,
    pub stimulus: StimulusPayload,
    /// Training trials only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_mean: Option<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub click: Point,
    pub true_mean: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: bool,
    pub trial_index: usize,
    pub overtime: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    pub phase: Phase,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub plan: SessionPlan,
    pub cursor: usize,
    pub phase: Phase,
    pub engagement_failures: usize,
    pub created_at: u64,
}

enum SlotRef {
    Trial { stimulus_id: String, training: bool },
    Engagement { index: usize, check: EngagementCheck },
}

impl Session {
    pub fn from_record(record: SessionRecord) -> Self {
        Self {
            id: record.id,
            plan: record.plan,
            cursor: 0,
            phase: Phase::Tutorial,
            engagement_failures: 0,
            created_at: record.created_at,
        }
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord { id: self.id.clone(), created_at: self.created_at, plan: self.plan.clone() }
    }

    pub fn total_slots(&self) -> usize {
        self.plan.total_slots()
    }

    pub fn excluded(&self) -> bool {
        self.engagement_failures >= ENGAGEMENT_FAIL_LIMIT
    }

    fn slot(&self, index: usize) -> Option<SlotRef> {
        Some(match self.plan.slots().into_iter().nth(index)? {
            Slot::Training { stimulus_id, .. } => SlotRef::Trial { stimulus_id: stimulus_id.to_string(), training: true },
            Slot::Formal { stimulus_id, .. } => SlotRef::Trial { stimulus_id: stimulus_id.to_string(), training: false },
            Slot::Engagement { index, check } => SlotRef::Engagement { index, check },
        })
    }

    /// Leave the tutorial; later phases are driven by the cursor.
    pub fn begin(&mut self) {
        if self.phase == Phase::Tutorial {
            self.phase = Phase::Training;
        }
    }

    /// Descriptor for the trial at the cursor.
    pub fn next_trial(&mut self, pool: &StimulusPool) -> Result<TrialDescriptor, SessionError> {
        if self.phase == Phase::Done {
            return Err(SessionError::Done);
        }
        self.begin();
        let trial_index = self.cursor;
        let training_len = self.plan.training.len();
        let progress = if trial_index < training_len {
            Progress { index: trial_index + 1, of: training_len }
        } else {
            Progress { index: trial_index - training_len + 1, of: self.total_slots() - training_len }
        };
        let base = |kind, feedback, stimulus, true_mean| TrialDescriptor {
            session_id: self.id.clone(),
            trial_index,
            phase: self.phase,
            kind,
            progress,
            timing: TIMING,
            feedback,
            stimulus,
            true_mean,
        };
        match self.slot(trial_index).ok_or(SessionError::Done)? {
            SlotRef::Trial { stimulus_id, training } => {
                let s = pool.get(&stimulus_id).ok_or_else(|| SessionError::UnknownStimulus(stimulus_id.clone()))?;
                let marks = s
                    .marks()
                    .map(|(p, l)| {
                        let style = mark_style(s, l)?;
                        Ok(MarkPayload { x: p.x, y: p.y, radius: style.radius, fill: style.fill })
                    })
                    .collect::<wai_core::Result<Vec<_>>>()?;
                let payload = StimulusPayload {
                    id: s.id.clone(),
                    channel: s.channel(),
                    region_px: REGION_PX,
                    tick_spacing: TICK_SPACING,
                    marks,
                };
                Ok(base(TrialKind::Stimulus, training, payload, training.then_some(s.true_mean)))
            }
            SlotRef::Engagement { index, check } => {
                let payload = StimulusPayload {
                    id: engagement_id(index),
                    channel: self.plan.channel,
                    region_px: REGION_PX,
                    tick_spacing: TICK_SPACING,
                    marks: vec![MarkPayload {
                        x: check.point.x,
                        y: check.point.y,
                        radius: LIGHTNESS_MARK_DIAMETER / 2.0,
                        fill: lightness_to_srgb(SIZE_MARK_LIGHTNESS)?.hex(),
                    }],
                };
                Ok(base(TrialKind::Engagement, false, payload, None))
            }
        }
    }

    /// Validate a submission and build its record without changing state.
    pub fn prepare_response(
        &self,
        pool: &StimulusPool,
        trial_index: usize,
        click: Point,
        rt_ms: f64,
    ) -> Result<TrialResponse, SessionError> {
        if self.phase == Phase::Done {
            return Err(SessionError::Done);
        }
        if trial_index != self.cursor {
            return Err(SessionError::OutOfOrder { expected: self.cursor, got: trial_index });
        }
        if !click.in_region() {
            return Err(SessionError::OutOfBounds { x: click.x, y: click.y });
        }
        if !rt_ms.is_finite() || rt_ms < 0.0 {
            return Err(SessionError::InvalidRt(rt_ms));
        }
        let slot = self.slot(trial_index).ok_or(SessionError::Done)?;
        Ok(match slot {
            SlotRef::Trial { stimulus_id, training } => {
                if pool.get(&stimulus_id).is_none() {
                    return Err(SessionError::UnknownStimulus(stimulus_id));
                }
                let mut r = TrialResponse::new(self.id.clone(), trial_index, stimulus_id, click, rt_ms);
                r.is_training = training;
                r
            }
            SlotRef::Engagement { index, check } => {
                let mut r = TrialResponse::new(self.id.clone(), trial_index, engagement_id(index), click, rt_ms);
                r.is_engagement = true;
                r.engagement_pass = Some(check.passes(click));
                r
            }
        })
    }

    /// Advance past a logged response.
    pub fn apply(&mut self, response: &TrialResponse) {
        debug_assert_eq!(response.trial_index, self.cursor);
        if response.engagement_pass == Some(false) {
            self.engagement_failures += 1;
        }
        self.cursor += 1;
        self.phase = if self.cursor >= self.total_slots() {
            Phase::Done
        } else if self.cursor >= self.plan.training.len() {
            Phase::Formal
        } else {
            Phase::Training
        };
    }

    pub fn ack(&self, response: &TrialResponse, pool: &StimulusPool) -> Ack {
        let feedback = if response.is_training {
            pool.get(&response.stimulus_id).map(|s| Feedback { click: response.click, true_mean: s.true_mean })
        } else {
            None
        };
        Ack {
            accepted: true,
            trial_index: response.trial_index,
            overtime: response.overtime,
            alert: response.overtime.then(|| "Please respond within five seconds.".to_string()),
            feedback,
            phase: self.phase,
            remaining: self.total_slots() - self.cursor,
        }
    }
}

pub fn engagement_id(index: usize) -> String {
    format!("engagement-{index}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;
    use wai_core::stimgen::{plan_session, PoolConfig};

    fn pool() -> &'static StimulusPool {
        static POOL: OnceLock<StimulusPool> = OnceLock::new();
        POOL.get_or_init(|| StimulusPool::generate(4, Channel::Size, PoolConfig { per_cell: 6, controls: 6, training_per_cell: 2 }).unwrap())
    }

    fn session() -> Session {
        let plan = plan_session(pool(), 8).unwrap();
        Session::from_record(SessionRecord { id: "s1".into(), created_at: 0, plan })
    }

    #[test]
    fn walks_all_phases() {
        let mut s = session();
        assert_eq!(s.phase, Phase::Tutorial);
        let mut phases = Vec::new();
        while s.phase != Phase::Done {
            let d = s.next_trial(pool()).unwrap();
            phases.push(d.phase);
            assert_eq!(d.feedback, d.phase == Phase::Training);
            assert_eq!(d.true_mean.is_some(), d.phase == Phase::Training);
            let r = s.prepare_response(pool(), d.trial_index, Point::new(260.0, 260.0), 800.0).unwrap();
            s.apply(&r);
        }
        assert_eq!(phases.iter().filter(|p| **p == Phase::Training).count(), 18);
        assert_eq!(phases.iter().filter(|p| **p == Phase::Formal).count(), 64);
        assert!(matches!(s.next_trial(pool()), Err(SessionError::Done)));
    }

    #[test]
    fn rejects_bad_submissions() {
        let mut s = session();
        s.begin();
        assert!(matches!(
            s.prepare_response(pool(), 1, Point::new(1.0, 1.0), 1.0),
            Err(SessionError::OutOfOrder { expected: 0, got: 1 })
        ));
        assert!(matches!(s.prepare_response(pool(), 0, Point::new(501.0, 1.0), 1.0), Err(SessionError::OutOfBounds { .. })));
        assert!(matches!(s.prepare_response(pool(), 0, Point::new(1.0, 1.0), -1.0), Err(SessionError::InvalidRt(_))));
        let r = s.prepare_response(pool(), 0, Point::new(1.0, 1.0), 6200.0).unwrap();
        assert!(r.overtime && r.is_training);
        s.apply(&r);
        let ack = s.ack(&r, pool());
        assert!(ack.alert.is_some() && ack.feedback.is_some());
    }

    #[test]
    fn engagement_quadrant_rule() {
        let mut s = session();
        s.cursor = s.plan.slots().iter().position(|x| matches!(x, Slot::Engagement { .. })).unwrap();
        s.phase = Phase::Formal;
        let d = s.next_trial(pool()).unwrap();
        assert_eq!(d.kind, TrialKind::Engagement);
        assert_eq!(d.stimulus.marks.len(), 1);
        let p = Point::new(d.stimulus.marks[0].x, d.stimulus.marks[0].y);
        let same = Point::new(if p.x > 250.0 { 400.0 } else { 100.0 }, if p.y > 250.0 { 400.0 } else { 100.0 });
        let r = s.prepare_response(pool(), d.trial_index, same, 500.0).unwrap();
        assert_eq!(r.engagement_pass, Some(true));
        let other = Point::new(500.0 - same.x, same.y);
        let r = s.prepare_response(pool(), d.trial_index, other, 500.0).unwrap();
        assert_eq!(r.engagement_pass, Some(false));
        s.apply(&r);
        assert_eq!(s.engagement_failures, 1);
    }
}
