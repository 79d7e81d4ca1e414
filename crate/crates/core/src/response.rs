use serde::{Deserialize, Serialize};

use crate::geometry::Point;

/// Responses slower than this are flagged overtime (still accepted).
pub const RESPONSE_WINDOW_MS: f64 = 5000.0;
pub const RESPONSE_SCHEMA_VERSION: u32 = 1;

/// One click response, as logged and exported (one NDJSON line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResponse {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub session_id: String,
    /// Slot index within the session (training, formal and engagement slots).
    pub trial_index: usize,
    pub stimulus_id: String,
    /// Click in data-space stimulus coordinates.
    pub click: Point,
    pub rt_ms: f64,
    pub overtime: bool,
    pub is_training: bool,
    pub is_engagement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engagement_pass: Option<bool>,
    /// Same click pixel as the session's previous or next response.
    #[serde(default)]
    pub duplicate_pixel: bool,
    /// Session failed two or more engagement checks.
    #[serde(default)]
    pub excluded: bool,
}

fn schema_version() -> u32 {
    RESPONSE_SCHEMA_VERSION
}

impl TrialResponse {
    pub fn new(session_id: impl Into<String>, trial_index: usize, stimulus_id: impl Into<String>, click: Point, rt_ms: f64) -> Self {
        Self {
            schema_version: RESPONSE_SCHEMA_VERSION,
            session_id: session_id.into(),
            trial_index,
            stimulus_id: stimulus_id.into(),
            click,
            rt_ms,
            overtime: rt_ms > RESPONSE_WINDOW_MS,
            is_training: false,
            is_engagement: false,
            engagement_pass: None,
            duplicate_pixel: false,
            excluded: false,
        }
    }

    /// Formal test or control trial (not training, not an engagement check).
    pub fn is_formal(&self) -> bool {
        !self.is_training && !self.is_engagement
    }

    /// Integer pixel the click landed on.
    pub fn pixel(&self) -> (i64, i64) {
        (self.click.x.floor() as i64, self.click.y.floor() as i64)
    }
}

/// Flag back-to-back identical click pixels within each session, in log order.
pub fn mark_duplicate_pixels(records: &mut [TrialResponse]) {
    use std::collections::HashMap;
    let mut last: HashMap<String, usize> = HashMap::new();
    for i in 0..records.len() {
        if let Some(&prev) = last.get(&records[i].session_id) {
            if records[prev].pixel() == records[i].pixel() {
                records[prev].duplicate_pixel = true;
                records[i].duplicate_pixel = true;
            }
        }
        last.insert(records[i].session_id.clone(), i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overtime_flag() {
        assert!(TrialResponse::new("s", 0, "x", Point::new(1.0, 1.0), 6200.0).overtime);
        assert!(!TrialResponse::new("s", 0, "x", Point::new(1.0, 1.0), 5000.0).overtime);
    }

    #[test]
    fn duplicate_pixels_flag_both() {
        let mut recs = vec![
            TrialResponse::new("a", 0, "x", Point::new(10.2, 10.7), 100.0),
            TrialResponse::new("b", 0, "x", Point::new(10.2, 10.7), 100.0),
            TrialResponse::new("a", 1, "y", Point::new(10.9, 10.1), 100.0),
            TrialResponse::new("a", 2, "z", Point::new(40.0, 10.1), 100.0),
        ];
        mark_duplicate_pixels(&mut recs);
        assert!(recs[0].duplicate_pixel && recs[2].duplicate_pixel);
        assert!(!recs[1].duplicate_pixel && !recs[3].duplicate_pixel);
    }
}
